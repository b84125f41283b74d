import math
from dataclasses import replace
from importlib import resources

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import fsolve

from alqhd.encode import TermTooWide
from alqhd.objectives import evaluate
from alqhd.powergrid import (
    Branch,
    Bus,
    Disconnected,
    Generator,
    ParseError,
    PowerCase,
    UnsupportedVersion,
    ZeroImpedanceBranch,
    build_acopf,
    build_ybus,
    extract_subgraph,
    fixture,
    is_connected,
    parse_case,
    penalized_objective,
    synthetic_case,
    to_matpower,
)


def fixture_text(name):
    return resources.files("alqhd").joinpath(f"data/{name}.m").read_text()


def two_bus(r=0.0, x=0.1, b=0.0, bs=0.0, base=100.0, tap=1.0, shift=0.0):
    buses = (Bus(1, 3, 0, 0, 0, bs, 1.1, 0.9), Bus(2, 1, 50, 10, 0, 0, 1.1, 0.9))
    gens = (Generator(1, 100, 0, 50, -50),)
    return PowerCase(base, buses, gens, (Branch(1, 2, r, x, b, tap, shift),))


def injections(Y, V, theta):
    v = V * np.exp(1j * theta)
    return v * np.conj(Y @ v)


def bisect(fun, lo, hi, tol=1e-15):
    flo = fun(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = fun(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def solve_case2():
    """Flow point for the 2-bus fixture: nested bisection on (theta2, V2)."""
    case = fixture("case2")
    y = 1 / complex(0.01, 0.1)
    Y = np.array([[y + 0.01j, -y], [-y, y + 0.01j]])
    pd, qd = 0.6, 0.2

    def theta_for(v2):
        return bisect(lambda t: injections(Y, np.array([1.0, v2]), np.array([0.0, t]))[1].real + pd, -1.0, 0.0)

    def q_mismatch(v2):
        s = injections(Y, np.array([1.0, v2]), np.array([0.0, theta_for(v2)]))
        return s[1].imag + qd

    v2 = bisect(q_mismatch, 0.8, 1.1)
    t2 = theta_for(v2)
    s = injections(Y, np.array([1.0, v2]), np.array([0.0, t2]))
    return case, Y, np.array([1.0, v2, t2, s[0].real, s[0].imag])


def test_parse_fixture():
    c = fixture("case2")
    assert (c.n_bus, len(c.generators), len(c.branches)) == (2, 1, 1)
    assert c.base_mva == 100.0 and c.name == "case2"
    assert c.generators[0].cost == (0.02, 15.0, 10.0)
    assert c.branches[0].tap == 1.0  # ratio 0 means nominal


def test_parse_is_lexically_robust():
    text = fixture_text("case2")
    bare = "\n".join(line.split("%")[0] for line in text.splitlines())
    noisy = bare.replace(";\n", "\n").replace("mpc.bus = [", "% leading comment\nmpc.bus = [  % inline\n\n")
    assert parse_case(bare) == parse_case(text) == parse_case(noisy)
    one_line = "mpc.version = '2';\nmpc.baseMVA = 100;\n" + \
        "mpc.bus = [1 3 0 0 0 0 1 1 0 230 1 1.1 0.9; 2 1 60 20 0 0 1 1 0 230 1 1.1 0.9];\n" + \
        "mpc.gen = [1 60 20 100 -100 1 100 1 150 0];\n" + \
        "mpc.branch = [1 2 0.01 0.1 0.02 250 250 250 0 0 1 -360 360];\n" + \
        "mpc.gencost = [2 0 0 3 0.02 15 10];\n"
    assert parse_case(one_line, name="case2") == parse_case(text)


def test_parse_errors():
    with pytest.raises(ParseError) as err:
        parse_case(fixture_text("case2_malformed"))
    msg = str(err.value)
    assert "line 6" in msg and "mpc.bus" in msg and "row 2" in msg
    with pytest.raises(UnsupportedVersion):
        parse_case(fixture_text("case2").replace("'2'", "'1'"))
    with pytest.raises(ParseError):
        parse_case(fixture_text("case2").replace("mpc.branch", "mpc.lines"))
    with pytest.raises(ParseError):
        parse_case(fixture_text("case2").replace("0.01\t0.1", "0.01\tabc"))


@pytest.mark.parametrize("name", ["case2", "case3", "case5chain"])
def test_round_trip(name):
    c = fixture(name)
    assert parse_case(to_matpower(c)) == c


def test_ybus_hand_example():
    Y = build_ybus(two_bus()).toarray()
    assert np.allclose(Y, [[-10j, 10j], [10j, -10j]], atol=1e-12, rtol=0)


def test_ybus_shunt_per_unit():
    base = build_ybus(two_bus()).toarray()
    # shunts are given in MVAr at 1 p.u. voltage
    Y = build_ybus(two_bus(bs=5.0)).toarray()
    assert Y[0, 0] - base[0, 0] == pytest.approx(0.05j, abs=1e-15)
    Y1 = build_ybus(two_bus(bs=0.05, base=1.0)).toarray()
    assert Y1[0, 0] - build_ybus(two_bus(base=1.0)).toarray()[0, 0] == pytest.approx(0.05j, abs=1e-15)


def test_ybus_fixture_entries():
    Y = build_ybus(fixture("case2")).toarray()
    y = 1 / complex(0.01, 0.1)
    expect = np.array([[y + 0.01j, -y], [-y, y + 0.01j]])
    assert np.max(np.abs(Y - expect)) <= 1e-12


def test_ybus_tap_and_shift():
    t = 0.95 * np.exp(1j * math.radians(3.0))
    Y = build_ybus(two_bus(r=0.02, x=0.2, b=0.1, tap=0.95, shift=3.0)).toarray()
    y = 1 / complex(0.02, 0.2)
    assert Y[0, 0] == pytest.approx((y + 0.05j) / 0.95**2)
    assert Y[0, 1] == pytest.approx(-y / np.conj(t))
    assert Y[1, 0] == pytest.approx(-y / t)
    assert Y[1, 1] == pytest.approx(y + 0.05j)
    sym = build_ybus(two_bus(r=0.02, x=0.2)).toarray()
    assert sym[0, 1] == sym[1, 0]


def test_ybus_skips_out_of_service_and_rejects_zero_impedance():
    c = two_bus()
    off = replace(c, branches=(replace(c.branches[0], status=0),))
    assert build_ybus(off).nnz == 0
    with pytest.raises(ZeroImpedanceBranch):
        build_ybus(two_bus(r=0.0, x=0.0))


def test_single_bus_residual():
    c = PowerCase(100.0, (Bus(1, 3, 40.0, 5.0, 0, 0, 1.05, 0.95),), (Generator(1, 80, 0, 20, -20),))
    m = build_acopf(c)
    assert m.registry == ("V[1]", "Pg[0]", "Qg[0]")
    pts = np.random.default_rng(0).uniform(0, 1, (5, 3))
    assert evaluate(m.p_residuals[0], pts) == pytest.approx(0.4 - pts[:, 1])
    assert all(t.factors == () or len(t.factors) == 1 for t in m.p_residuals[0].terms)


def test_registry_counts():
    m = build_acopf(fixture("case2"))
    assert m.n_active == 5
    assert m.registry == ("V[1]", "V[2]", "theta[2]", "Pg[0]", "Qg[0]")
    m3 = build_acopf(fixture("case3"))
    assert m3.n_active == 2 * 3 - 1 + 2 * 2
    assert "theta[1]" not in m3.registry
    assert max(r.width for r in m3.residuals) <= 4


def test_flow_point_residuals():
    case, Y, x = solve_case2()
    m = build_acopf(case)
    assert np.max(np.abs(build_ybus(case).toarray() - Y)) <= 1e-12
    for res in m.residuals:
        assert abs(evaluate(res, x)) <= 1e-8
    cost = evaluate(m.objective, x)
    assert cost == pytest.approx(0.02 * (100 * x[3]) ** 2 + 15 * 100 * x[3] + 10, rel=1e-12)
    pen = evaluate(penalized_objective(m, 1e3), x)
    assert abs(pen - cost) <= 1e3 * 4 * 1e-16 + 1e-9 * abs(cost)


def test_case3_flow_point():
    case = fixture("case3")
    Y = build_ybus(case).toarray()
    m = build_acopf(case)
    pd = np.array([b.Pd for b in case.buses]) / 100
    qd = np.array([b.Qd for b in case.buses]) / 100
    pg2 = 0.4

    # slack at bus 1 and a PV unit at bus 2 held at 1.0 p.u.: unknowns theta2, theta3, V3, Qg2
    def mismatch(u):
        th = np.array([0.0, u[0], u[1]])
        V = np.array([1.0, 1.0, u[2]])
        s = injections(Y, V, th)
        return [s[1].real - pg2 + pd[1], s[2].real + pd[2], s[2].imag + qd[2]]

    u = fsolve(mismatch, [0.0, 0.0, 1.0], xtol=1e-12)
    th = np.array([0.0, u[0], u[1]])
    V = np.array([1.0, 1.0, u[2]])
    s = injections(Y, V, th)
    qg2 = s[1].imag + qd[1]
    x = np.array([1.0, 1.0, u[2], u[0], u[1], s[0].real + pd[0], pg2, s[0].imag + qd[0], qg2])
    for res in m.residuals:
        assert abs(evaluate(res, x)) <= 1e-8


def test_penalized_objective():
    c = PowerCase(100.0, (Bus(1, 3, 0, 0, 0, 0, 1.05, 0.95),), (Generator(1, 80, 0, 20, -20, cost=(0.1, 2, 3)),))
    m = replace(build_acopf(c), p_residuals=(), q_residuals=())
    assert penalized_objective(m, 5.0) == m.objective.collect()
    with pytest.raises(ValueError):
        penalized_objective(m, 0.0)
    with pytest.raises(TermTooWide):
        penalized_objective(build_acopf(fixture("case3")), 1.0, max_term_width=3)


@pytest.mark.parametrize("name", ["case2", "case3"])
def test_penalty_dominates_cost(name):
    m = build_acopf(fixture(name))
    pen = penalized_objective(m, 50.0)
    pts = np.random.default_rng(1).uniform(m.box.lower, m.box.upper, (200, m.n_active))
    assert np.all(evaluate(pen, pts) >= evaluate(m.objective, pts) - 1e-12 * (1 + np.abs(evaluate(pen, pts))))


def test_subgraph_examples():
    c = fixture("case5chain")
    full = extract_subgraph(c, 5)
    assert full.n_bus == 5 and len(full.branches) == 4 and len(full.generators) == 2
    one = extract_subgraph(c, 1)
    assert one.n_bus == 1 and one.branches == () and one.buses[0].type == 3
    three = extract_subgraph(c, 3)
    assert [b.Pd for b in three.buses] == [20, 20, 0]  # old buses 3, 4, 5
    assert {(br.f, br.t) for br in three.branches} == {(1, 2), (2, 3)}
    assert sorted(g.bus for g in three.generators) == [2, 3]
    assert extract_subgraph(c, 3, seed_rule=1).buses[2].Pd == 20
    with pytest.raises(ValueError):
        extract_subgraph(c, 6)


def test_disconnected():
    c = fixture("case5chain")
    cut = replace(c, branches=c.branches[:2] + c.branches[3:])
    with pytest.raises(Disconnected) as err:
        extract_subgraph(cut, 3)
    assert err.value.partial.n_bus == 2
    assert extract_subgraph(cut, 3, allow_partial=True).n_bus == 2


@settings(max_examples=25)
@given(st.integers(2, 30), st.integers(0, 1000), st.data())
def test_synthetic_subgraphs(n, seed, data):
    case = synthetic_case(n, seed)
    assert is_connected(case)
    k = data.draw(st.integers(1, n))
    sub = extract_subgraph(case, k)
    assert sub.n_bus == k and is_connected(sub)
    assert [b.id for b in sub.buses] == list(range(1, k + 1))
    assert extract_subgraph(case, k) == sub
    Y = build_ybus(sub).toarray()
    assert np.array_equal(Y, Y.T)
    adj = {(br.f - 1, br.t - 1) for br in sub.branches} | {(br.t - 1, br.f - 1) for br in sub.branches}
    for i, j in zip(*np.nonzero(Y)):
        assert i == j or (i, j) in adj
