import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from alqhd.grid import DimensionMismatch
from alqhd.objectives import (
    ACKLEY_SHIFT,
    Factor,
    SeparableExpr,
    Term,
    ackley_shifted,
    evaluate,
    make_term,
    rastrigin_curved_constraints,
    rastrigin_scaled,
)


def ackley_reference(x, y):
    # term-by-term transcription of the 2-d Ackley formula
    a, b, c = 20.0, 0.2, 2 * math.pi
    s1 = (x * x + y * y) / 2
    s2 = (math.cos(c * x) + math.cos(c * y)) / 2
    return -a * math.exp(-b * math.sqrt(s1)) - math.exp(s2) + a + math.e


def rastrigin_reference(x, alpha=3.0):
    return 10 * len(x) + sum((alpha * v) ** 2 - 10 * math.cos(2 * math.pi * alpha * v) for v in x)


def test_ackley_minima():
    f = ackley_shifted(2, ACKLEY_SHIFT)
    assert abs(f(np.array(ACKLEY_SHIFT))) <= 1e-12
    f0 = ackley_shifted(2, (0.0, 0.0))
    assert abs(f0(np.zeros(2))) <= 1e-12
    assert f0(np.array([1.0, 1.0])) == pytest.approx(ackley_reference(1.0, 1.0), abs=1e-12)
    with pytest.raises(DimensionMismatch):
        ackley_shifted(2, (0.0,))


def test_ackley_vectorised():
    f = ackley_shifted()
    pts = np.random.default_rng(0).uniform(-5, 5, (7, 3, 2))
    vals = f(pts)
    assert vals.shape == (7, 3)
    s = np.array(ACKLEY_SHIFT)
    assert vals[4, 1] == pytest.approx(ackley_reference(*(pts[4, 1] - s)), abs=1e-12)


def test_ackley_positive_away_from_shift():
    f = ackley_shifted()
    rng = np.random.default_rng(1)
    pts = rng.uniform(-5, 5, (1000, 2))
    pts = pts[np.linalg.norm(pts - np.array(ACKLEY_SHIFT), axis=1) > 1e-3]
    assert np.all(f(pts) > 0)


def test_rastrigin_values():
    f = rastrigin_scaled(2, 3.0)
    assert f(np.zeros(2)) == 0.0
    g = rastrigin_scaled(1, 3.0)
    for k in (1, 2, 3):
        assert abs(g(np.array([k / 3])) - k * k) <= 0.15
    assert f(np.array([0.6633, 0.6633])) == pytest.approx(7.960, abs=5e-3)


def test_rastrigin_expr_matches_formula():
    f = rastrigin_scaled(2, 3.0)
    pts = np.random.default_rng(2).uniform(-5, 5, (100, 2))
    direct = np.array([rastrigin_reference(p) for p in pts])
    assert np.max(np.abs(evaluate(f.expr, pts) - direct)) <= 1e-10
    assert np.max(np.abs(f(pts) - direct)) <= 1e-10


@given(st.floats(-5, 5), st.floats(-5, 5))
def test_rastrigin_separable(x0, x1):
    f2, f1 = rastrigin_scaled(2), rastrigin_scaled(1)
    assert f2(np.array([x0, x1])) == pytest.approx(f1(np.array([x0])) + f1(np.array([x1])), abs=1e-10)


def test_curved_constraints():
    cs = rastrigin_curved_constraints()
    assert np.all(cs.ineq_values(np.array([0.6633, 0.6633])) <= 0)
    g = cs.ineq_values(np.zeros(2))
    assert g[0] == pytest.approx(0.5 + 0.02 * 0.25, abs=1e-15)
    assert g[0] == pytest.approx(0.505)
    assert cs.ineq_values(np.array([0.5, 0.5])) == pytest.approx([0.0, 0.0], abs=1e-15)
    assert cs.violation(np.zeros(2)) == pytest.approx(0.505)
    for g in cs.inequalities:
        pts = np.random.default_rng(3).uniform(-2, 2, (20, 2))
        assert evaluate(g.expr, pts) == pytest.approx(g(pts), abs=1e-12)


def test_evaluate_examples():
    assert evaluate(SeparableExpr(2, ()), np.array([1.0, 2.0])) == 0.0
    e = SeparableExpr(2, (make_term(2.0, [(0, Factor("power", 1)), (1, Factor("cos"))]),))
    assert evaluate(e, np.array([3.0, 0.0])) == 6.0
    with pytest.raises(DimensionMismatch):
        evaluate(e, np.array([1.0, 2.0, 3.0]))


def test_term_ordering_enforced():
    f = (Factor("power", 1),)
    with pytest.raises(ValueError):
        Term(1.0, ((1, f), (0, f)))
    t = make_term(1.0, [(1, Factor("power", 1)), (0, Factor("sin")), (1, Factor("power", 2))])
    assert t.variables == (0, 1)
    assert evaluate(SeparableExpr(2, (t,)), np.array([0.3, 2.0])) == pytest.approx(math.sin(0.3) * 8)


def test_factor_validation():
    with pytest.raises(ValueError):
        Factor("tan")
    with pytest.raises(ValueError):
        Factor("power", 1.5)


factor_st = st.one_of(
    st.builds(Factor, st.just("power"), st.integers(0, 3).map(float)),
    st.builds(Factor, st.sampled_from(["cos", "sin"]), st.floats(-3, 3), st.floats(-3, 3)),
    st.builds(Factor, st.just("exp"), st.floats(-1, 1), st.floats(-1, 1)),
)
term_st = st.builds(
    lambda c, fs: make_term(c, fs),
    st.floats(-5, 5),
    st.lists(st.tuples(st.integers(0, 2), factor_st), max_size=3),
)
expr_st = st.lists(term_st, max_size=5).map(lambda ts: SeparableExpr(3, tuple(ts)))
point_st = st.lists(st.floats(-2, 2), min_size=3, max_size=3).map(np.array)


@given(expr_st, st.floats(-4, 4), point_st)
def test_scaling_is_linear(e, a, x):
    assert evaluate(e * a, x) == pytest.approx(a * evaluate(e, x), rel=1e-12, abs=1e-9)


@given(expr_st, expr_st, point_st)
def test_algebra_matches_pointwise(e1, e2, x):
    v1, v2 = evaluate(e1, x), evaluate(e2, x)
    scale = 1 + abs(v1) + abs(v2)
    assert evaluate(e1 + e2, x) == pytest.approx(v1 + v2, abs=1e-9 * scale)
    assert evaluate(e1 - e2, x) == pytest.approx(v1 - v2, abs=1e-9 * scale)
    assert evaluate(e1 * e2, x) == pytest.approx(v1 * v2, abs=1e-9 * scale**2)
    assert evaluate(e1.square(), x) == pytest.approx(v1 * v1, abs=1e-9 * scale**2)
