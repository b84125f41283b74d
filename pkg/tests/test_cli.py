import json

import pytest

from alqhd import cli

FAST = ["--steps", "400", "--grid", "8"]


def records(path):
    with open(path) as fh:
        recs = [json.loads(line) for line in fh]
    for r in recs:
        cli.validate_record(r)
    return recs


def rerun(rec, tmp_path):
    out = tmp_path / "replay.jsonl"
    argv = cli.argv_from_config(rec["command"], rec["config"]) + ["--out", str(out)]
    assert cli.main(argv) == 0
    return records(out)


def test_bench_ackley_rows_and_echo(tmp_path, capsys):
    out = tmp_path / "a.jsonl"
    rc = cli.main(["bench-ackley", *FAST, "--zoom", "1,3,5", "--seed-shift", "0.962,0.370", "--out", str(out)])
    assert rc == 0
    recs = records(out)
    assert [r["outputs"]["zoom"] for r in recs] == [1, 3, 5]
    vals = [r["outputs"]["objective"] for r in recs]
    assert vals == sorted(vals, reverse=True)
    assert recs[0]["config"]["seed_shift"] == [0.962, 0.37]
    assert "objective" in capsys.readouterr().out
    again = rerun(recs[1], tmp_path)
    assert len(again) == 1
    assert again[0]["outputs"]["objective"] == recs[1]["outputs"]["objective"]
    assert again[0]["outputs"]["position"] == recs[1]["outputs"]["position"]


def test_bench_ackley_single_row(tmp_path):
    out = tmp_path / "a.jsonl"
    assert cli.main(["bench-ackley", *FAST, "--zoom", "1", "--out", str(out)]) == 0
    assert len(records(out)) == 1


def test_bench_rastrigin_with_baseline(tmp_path):
    out = tmp_path / "r.jsonl"
    rc = cli.main(["bench-rastrigin", *FAST, "--zoom", "1", "--alm-iters", "3",
                   "--baseline-starts", "10,100", "--out", str(out)])
    assert rc == 0
    recs = records(out)
    rows = [r for r in recs if r["kind"] == "row"]
    base = [r for r in recs if r["kind"] == "baseline"]
    assert len(rows) == 1 and [b["outputs"]["starts"] for b in base] == [10, 100]
    assert base[1]["outputs"]["objective"] <= base[0]["outputs"]["objective"]
    for key in ("alm_iterations", "violation", "rho_final", "wall_time"):
        assert key in rows[0]["outputs"]
    again = rerun(rows[0], tmp_path)
    for key in ("objective", "position", "violation"):
        assert again[0]["outputs"][key] == rows[0]["outputs"][key]


@pytest.mark.parametrize("argv", [
    ["bench-rastrigin", "--zoom", "0"],
    ["bench-ackley", "--eta", "1.5"],
    ["bench-ackley", "--seed-shift", "1,2,3"],
    ["resources"],
    ["frobnicate"],
])
def test_usage_errors(argv, capsys):
    assert cli.main(argv) == 2


def test_resources_series(tmp_path):
    out = tmp_path / "res.jsonl"
    assert cli.main(["resources", "synthetic:10", "--sizes", "2,4,6,8", "--out", str(out)]) == 0
    recs = records(out)
    rows = [r["outputs"] for r in recs if r["kind"] == "row"]
    assert [r["buses"] for r in rows] == [2, 4, 6, 8]
    for r in rows:
        assert r["t_total"] >= r["ft_NtK"]
    fit = [r for r in recs if r["kind"] == "fit"][0]["outputs"]["fits"]
    assert 0 <= fit["nisq_hard"]["r2"] <= 1


def test_resources_fixture_row(tmp_path):
    import math

    out = tmp_path / "one.jsonl"
    assert cli.main(["resources", "fixture:case2", "--trotter-steps", "3", "--out", str(out)]) == 0
    (rec,) = records(out)
    o = rec["outputs"]
    m = o["trotter_steps"]
    per_step = o["t_total"] // m
    assert o["t_total"] == m * per_step
    assert per_step == o["ft_NtK"] // m + math.ceil(o["r_eps"] * (o["ft_NrK"] + o["ft_NrV"]) / m)


def test_resources_bad_path(capsys):
    assert cli.main(["resources", "/nonexistent/case.m"]) == 1
    assert "No such file" in capsys.readouterr().err


def test_resources_errors_name_stage(capsys):
    assert cli.main(["resources", "fixture:case2", "--sizes", "3"]) == 1
    err = capsys.readouterr().err
    assert "extract_subgraph" in err and "size 3" in err


def test_parse_case(capsys):
    from importlib import resources

    good = resources.files("alqhd").joinpath("data/case3.m")
    bad = resources.files("alqhd").joinpath("data/case2_malformed.m")
    assert cli.main(["parse-case", str(good)]) == 0
    assert '"n_active": 9' in capsys.readouterr().out
    assert cli.main(["parse-case", str(bad)]) == 1
    assert "line 6" in capsys.readouterr().err


def test_parse_case_accepts_fixture_and_synthetic(capsys):
    assert cli.main(["parse-case", "fixture:case2"]) == 0
    assert '"n_active": 5' in capsys.readouterr().out
    assert cli.main(["parse-case", "synthetic:6"]) == 0
    assert '"buses": 6' in capsys.readouterr().out


def test_encode(tmp_path):
    from alqhd.encode import ZStringHamiltonian, diagonal_on_onehot

    spec = {"dim": 2, "box": [[0, 2], [0, 2]], "resolution": 2,  # grid values (0, 1)
            "terms": [{"coef": 1.0, "factors": [[0, ["power", 1]], [1, ["power", 1]]]}]}
    src = tmp_path / "e.json"
    src.write_text(json.dumps(spec))
    dest = tmp_path / "h.txt"
    assert cli.main(["encode", str(src), "--hamiltonian", str(dest)]) == 0
    H = ZStringHamiltonian.from_text(dest.read_text())
    assert H.terms == {(): 0.25, (1,): -0.25, (3,): -0.25, (1, 3): 0.25}
    assert diagonal_on_onehot(H, [1, 1]) == 1.0
