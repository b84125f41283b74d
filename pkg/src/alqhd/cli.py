"""Command-line front end: benchmarks, resource estimates, encoding, case checks.

Every row printed as a table line is also available as a JSON record
(``--out FILE``, one record per line) carrying the schema tag, the command, a
full configuration echo and the outputs.  Feeding a record's ``config`` back
through :func:`argv_from_config` reproduces the row.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from typing import Sequence

import numpy as np

from . import alm as alm_mod
from . import baseline, encode, powergrid, resources
from .grid import DomainBox, Grid
from .objectives import (
    ACKLEY_SHIFT,
    Factor,
    SeparableExpr,
    ackley_shifted,
    make_term,
    rastrigin_curved_constraints,
    rastrigin_scaled,
)
from .qhd import Schedule
from .zoom import ZoomConfig, refine

SCHEMA = "alqhd.run/1"
RASTRIGIN_OPT = (0.66330408, 0.66330408)
RECORD_KEYS = {"schema": str, "command": str, "kind": str, "config": dict, "outputs": dict}


class UsageError(Exception):
    pass


# -- argument types -------------------------------------------------------------


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals or any(v < 1 for v in vals):
        raise argparse.ArgumentTypeError(f"values must be positive integers, got {text!r}")
    return vals


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _positive(kind):
    def conv(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid value {text!r}")
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v

    return conv


def _eta(text):
    v = _positive(float)(text)
    if v > 1:
        raise argparse.ArgumentTypeError(f"eta must lie in (0, 1], got {text}")
    return v


# -- records --------------------------------------------------------------------


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, tuple):
        return [_jsonable(x) for x in v]
    if isinstance(v, list):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    return v


def make_record(command: str, kind: str, config: dict, outputs: dict) -> dict:
    return {"schema": SCHEMA, "command": command, "kind": kind,
            "config": _jsonable(config), "outputs": _jsonable(outputs)}


def validate_record(rec: dict) -> None:
    for key, typ in RECORD_KEYS.items():
        if not isinstance(rec.get(key), typ):
            raise ValueError(f"record field {key!r} missing or not a {typ.__name__}")
    if rec["schema"] != SCHEMA:
        raise ValueError(f"unknown schema {rec['schema']!r}")
    json.loads(json.dumps(rec))


def argv_from_config(command: str, config: dict) -> list[str]:
    argv = [command]
    for key, val in config.items():
        if key in ("case", "input"):
            continue
        flag = "--" + key.replace("_", "-")
        if isinstance(val, bool):
            if val:
                argv.append(flag)
        elif val is None:
            continue
        elif isinstance(val, list):
            argv += [flag, ",".join(repr(v) if isinstance(v, float) else str(v) for v in val)]
        else:
            argv += [flag, repr(val) if isinstance(val, float) else str(val)]
    for key in ("case", "input"):
        if config.get(key) is not None:
            argv.append(str(config[key]))
    return argv


def _config(args: argparse.Namespace, **override) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("func", "out", "command")}
    cfg.update(override)
    return cfg


def _schedule(args) -> Schedule:
    return Schedule(s=args.sched_s, total_time=args.time, steps=args.steps)


def _print_table(rows: Sequence[dict], columns: Sequence[str], stream) -> None:
    def fmt(v):
        if isinstance(v, float):
            return f"{v:.6g}"
        if isinstance(v, (list, tuple)):
            return "(" + ", ".join(fmt(x) for x in v) + ")"
        return str(v)

    cells = [[fmt(r.get(c, "")) for c in columns] for r in rows]
    widths = [max([len(c)] + [len(row[i]) for row in cells]) for i, c in enumerate(columns)]
    print("  ".join(c.ljust(w) for c, w in zip(columns, widths)), file=stream)
    for row in cells:
        print("  ".join(v.ljust(w) for v, w in zip(row, widths)), file=stream)


# -- commands -------------------------------------------------------------------


def _baseline_rows(command, args, f, box, cs, ref):
    out = []
    for k in args.baseline_starts or []:
        t0 = time.perf_counter()
        best, _ = baseline.multistart(f, box, baseline.StartBudget(k, args.seed, box), cs)
        out.append(make_record(command, "baseline", _config(args, baseline_starts=[k]), {
            "starts": k,
            "seed": args.seed,
            "objective": best.f,
            "position": best.x,
            "position_error": float(np.linalg.norm(best.x - np.asarray(ref))),
            "violation": best.max_violation,
            "feasible": best.feasible,
            "wall_time": time.perf_counter() - t0,
        }))
    return out


def cmd_bench_ackley(args) -> list[dict]:
    shift = tuple(args.seed_shift)
    if len(shift) != 2:
        raise UsageError("--seed-shift needs two comma-separated numbers")
    f = ackley_shifted(2, shift)
    box = DomainBox.cube(-5.0, 5.0, 2)
    zooms = sorted(set(args.zoom))
    cfg = ZoomConfig(levels=max(zooms), eta=args.eta, resolution=args.grid)
    # one trace serves every Z: a Z-level run is the prefix of a longer one
    trace = refine(f, box, cfg, _schedule(args), scale_free=not args.raw_potential)
    records = []
    for z in zooms:
        best = trace.best_after(z)
        records.append(make_record("bench-ackley", "row", _config(args, zoom=[z], baseline_starts=None), {
            "zoom": z,
            "levels_run": min(z, len(trace.levels)),
            "objective": best.value,
            "position": best.position,
            "position_error": float(np.linalg.norm(best.position - np.asarray(shift))),
            "best_level": best.level,
            "norm_drift": max(r.norm_drift for r in trace.levels[:z]),
            "wall_time": sum(r.wall_time for r in trace.levels[:z]),
        }))
    return records + _baseline_rows("bench-ackley", args, f, box, None, shift)


def cmd_bench_rastrigin(args) -> list[dict]:
    f = rastrigin_scaled(2, 3.0)
    cs = rastrigin_curved_constraints()
    box = DomainBox.cube(-5.0, 5.0, 2)
    almcfg = alm_mod.AlmConfig(rho0=args.rho0, gamma=args.gamma, rho_max=args.rho_max,
                               max_iters=args.alm_iters, constraint_tol=args.cviol_tol)
    records = []
    for z in sorted(set(args.zoom)):
        zcfg = ZoomConfig(levels=z, eta=args.eta, resolution=args.grid)
        rep = alm_mod.solve(f, cs, box, zcfg, almcfg, _schedule(args),
                            scale_free=not args.raw_potential, raise_infeasible=False)
        records.append(make_record("bench-rastrigin", "row", _config(args, zoom=[z], baseline_starts=None), {
            "zoom": z,
            "objective": rep.objective,
            "position": rep.x,
            "position_error": float(np.linalg.norm(rep.x - np.asarray(RASTRIGIN_OPT))),
            "alm_iterations": rep.iterations,
            "violation": rep.violation,
            "rho_final": rep.rho_final,
            "feasible": rep.feasible,
            "wall_time": rep.wall_time,
        }))
    return records + _baseline_rows("bench-rastrigin", args, f, box, cs, RASTRIGIN_OPT)


def _load_case_arg(args) -> powergrid.PowerCase:
    if args.case.startswith("synthetic:"):
        return powergrid.synthetic_case(int(args.case.split(":", 1)[1]), seed=getattr(args, "seed", 0))
    if args.case.startswith("fixture:"):
        return powergrid.fixture(args.case.split(":", 1)[1])
    return powergrid.load_case(args.case)


def resource_row(case: powergrid.PowerCase, size: int, args) -> dict:
    stage = "extract_subgraph"
    try:
        sub = powergrid.extract_subgraph(case, size)
        stage = "build_ybus"
        ybus = powergrid.build_ybus(sub)
        stage = "build_acopf"
        model = powergrid.build_acopf(sub, ybus)
        stage = "penalized_objective"
        expr = powergrid.penalized_objective(model, args.mu)
        stage = "encode_expr"
        grid = Grid(model.box, args.resolution)
        H = encode.encode_expr(expr, grid, max_term_width=powergrid.PENALTY_MAX_WIDTH)
        stage = "estimate"
        model_t = resources.SynthesisModel(args.synth_a, args.synth_b)
        rep = resources.estimate(H, model.n_active, model_t, args.accuracy)
    except Exception as exc:
        raise RuntimeError(f"resources: stage {stage} failed at size {size}: {exc}") from exc
    out = replace(rep, trotter_steps=args.trotter_steps).record()
    out.update(buses=size, qubits=H.layout.n_qubits, z_strings=len(H),
               locality=encode.locality_histogram(H))
    return out


def cmd_resources(args) -> list[dict]:
    case = _load_case_arg(args)
    sizes = args.sizes or [case.n_bus]
    records = []
    series = []
    for size in sizes:
        out = resource_row(case, size, args)
        series.append(out)
        records.append(make_record("resources", "row", _config(args, sizes=[size]), out))
    if len(series) >= 3:
        fits = {}
        for metric in ("nisq_hard", "t_total", "ft_clifford"):
            pts = [(r["n_vars"], r[metric]) for r in series]
            try:
                c, p, r2 = resources.fit_power_law(pts)
            except resources.DegenerateSeries as exc:
                fits[metric] = {"error": str(exc)}
                continue
            fits[metric] = {"coefficient": c, "exponent": p, "r2": r2}
        records.append(make_record("resources", "fit", _config(args), {"fits": fits}))
    return records


def expr_from_json(spec: dict) -> tuple[SeparableExpr, list[np.ndarray]]:
    """``{"dim", "box": [[lo, hi], ...], "resolution", "terms": [{"coef", "factors": [[j, [kind, a, b]], ...]}]}``."""
    dim = int(spec["dim"])
    terms = []
    for t in spec["terms"]:
        by_var: dict[int, list[Factor]] = {}
        for j, fac in t.get("factors", []):
            by_var.setdefault(int(j), []).append(Factor(fac[0], *map(float, fac[1:])))
        terms.append(make_term(float(t["coef"]), [(j, tuple(fs)) for j, fs in sorted(by_var.items())]))
    expr = SeparableExpr(dim, tuple(terms)).collect()
    box = np.asarray(spec["box"], dtype=float)
    grid = Grid(DomainBox(box[:, 0], box[:, 1]), spec.get("resolution", 8))
    return expr, grid.axes()


def cmd_encode(args) -> list[dict]:
    with open(args.input) as fh:
        spec = json.load(fh)
    expr, axes = expr_from_json(spec)
    H = encode.encode_expr(expr, axes, max_term_width=args.max_width)
    text = H.to_text()
    if args.hamiltonian:
        with open(args.hamiltonian, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return [make_record("encode", "summary", _config(args), {
        "qubits": H.layout.n_qubits, "z_strings": len(H), "locality": encode.locality_histogram(H)})]


def cmd_parse_case(args) -> list[dict]:
    case = _load_case_arg(args)
    model = powergrid.build_acopf(case)
    out = {"name": case.name, "buses": case.n_bus, "generators": len(case.generators),
           "branches": len(case.branches), "connected": powergrid.is_connected(case)}
    out.update(model.summary())
    return [make_record("parse-case", "summary", _config(args), out)]


COLUMNS = {
    ("bench-ackley", "row"): ["zoom", "objective", "position", "position_error", "wall_time"],
    ("bench-rastrigin", "row"): ["zoom", "objective", "position", "alm_iterations", "violation", "rho_final", "wall_time"],
    ("resources", "row"): ["buses", "n_vars", "qubits", "z_strings", "nisq_hard", "ft_NtK", "ft_NrK", "ft_NrV",
                           "epsilon", "r_eps", "t_total"],
}
BASELINE_COLUMNS = ["starts", "seed", "objective", "position", "violation", "wall_time"]


# -- parser ---------------------------------------------------------------------


def _add_qhd_flags(p, grid_default):
    p.add_argument("--grid", type=_positive(int), default=grid_default, help="grid points per axis")
    p.add_argument("--eta", type=_eta, default=0.99, help="zoom mass threshold")
    p.add_argument("--time", type=_positive(float), default=10.0, help="evolution time T")
    p.add_argument("--steps", type=_positive(int), default=50_000, help="Trotter steps")
    p.add_argument("--sched-s", type=_positive(float), default=0.01, help="schedule offset s")
    p.add_argument("--raw-potential", action="store_true",
                   help="evolve in physical units instead of the rescaled box")
    p.add_argument("--baseline-starts", type=_int_list, default=None, help="multistart budgets, e.g. 10,100")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="alqhd", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bench-ackley", help="zoom-refined QHD on the shifted Ackley function")
    _add_qhd_flags(p, 32)
    p.add_argument("--zoom", type=_int_list, default=[1, 7, 13, 19])
    p.add_argument("--seed-shift", type=_float_list, default=list(ACKLEY_SHIFT))
    p.add_argument("--out", help="write JSON records (one per line) to this file")
    p.set_defaults(func=cmd_bench_ackley)

    p = sub.add_parser("bench-rastrigin", help="AL-QHD on the constrained scaled Rastrigin")
    _add_qhd_flags(p, 64)
    p.add_argument("--zoom", type=_int_list, default=[1, 2, 3, 4])
    p.add_argument("--rho0", type=_positive(float), default=1.0)
    p.add_argument("--gamma", type=_positive(float), default=2.0)
    p.add_argument("--rho-max", type=_positive(float), default=1e9)
    p.add_argument("--alm-iters", type=_positive(int), default=15)
    p.add_argument("--cviol-tol", type=_positive(float), default=1e-9)
    p.add_argument("--out", help="write JSON records (one per line) to this file")
    p.set_defaults(func=cmd_bench_rastrigin)

    p = sub.add_parser("resources", help="gate counts along an ACOPF subgraph series")
    p.add_argument("case", help="MATPOWER file, fixture:NAME or synthetic:N_BUSES")
    p.add_argument("--sizes", type=_int_list, default=None, help="subgraph bus counts")
    p.add_argument("--resolution", type=_positive(int), default=4)
    p.add_argument("--mu", type=_positive(float), default=1e3, help="balance penalty weight")
    p.add_argument("--accuracy", type=_positive(float), default=resources.RUN_ACCURACY)
    p.add_argument("--synth-a", type=_positive(float), default=3.0)
    p.add_argument("--synth-b", type=float, default=4.0)
    p.add_argument("--trotter-steps", type=_positive(int), default=1)
    p.add_argument("--seed", type=int, default=0, help="seed for synthetic cases")
    p.add_argument("--out", help="write JSON records (one per line) to this file")
    p.set_defaults(func=cmd_resources)

    p = sub.add_parser("encode", help="one-hot encode a JSON expression file")
    p.add_argument("input")
    p.add_argument("--hamiltonian", help="write the Z-string listing here instead of stdout")
    p.add_argument("--max-width", type=_positive(int), default=encode.MAX_TERM_WIDTH)
    p.add_argument("--out", help="write JSON records (one per line) to this file")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("parse-case", help="validate a MATPOWER case and summarise its ACOPF model")
    p.add_argument("case")
    p.add_argument("--out", help="write JSON records (one per line) to this file")
    p.set_defaults(func=cmd_parse_case)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        records = args.func(args)
    except UsageError as exc:
        print(f"alqhd: usage error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # surfaced as a runtime failure
        print(f"alqhd: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1

    table_stream = sys.stderr if args.command == "encode" and not args.hamiltonian else sys.stdout
    groups: dict[tuple[str, str], list[dict]] = {}
    for rec in records:
        validate_record(rec)
        groups.setdefault((rec["command"], rec["kind"]), []).append(rec["outputs"])
    for (cmd, kind), rows in groups.items():
        cols = COLUMNS.get((cmd, kind)) or (BASELINE_COLUMNS if kind == "baseline" else None)
        if cols:
            _print_table(rows, cols, table_stream)
        else:
            for row in rows:
                print(json.dumps(_jsonable(row), indent=2), file=table_stream)
        print(file=table_stream)
    if args.out:
        with open(args.out, "w") as fh:
            for rec in records:
                fh.write(json.dumps(rec) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
