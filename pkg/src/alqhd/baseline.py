"""Multi-start classical local search used as the comparison baseline.

Local solves use SciPy's L-BFGS-B on central finite-difference gradients;
constrained problems wrap it in a deterministic augmented-Lagrangian loop that
shares its penalty terms with the AL-QHD driver.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize

from .alm import AlmConfig, AlmState, augmented_lagrangian, update_multipliers, update_penalty
from .grid import DomainBox
from .objectives import ConstraintSet, ObjectiveFn
from .qhd import NonFiniteObjective

FD_STEP = 1e-6
GRAD_TOL = 1e-6
MAX_ITERS = 500
FEAS_TOL = 1e-8
INNER_ALM = AlmConfig(rho0=10.0, gamma=10.0, rho_max=1e10, max_iters=30, constraint_tol=FEAS_TOL)


@dataclass(frozen=True)
class StartBudget:
    n_starts: int
    seed: int
    box: DomainBox

    def __post_init__(self):
        if self.n_starts < 1:
            raise ValueError(f"n_starts must be >= 1, got {self.n_starts}")

    def start(self, i: int) -> np.ndarray:
        """Start point ``i``; independent of ``n_starts`` so budgets nest."""
        rng = np.random.default_rng([int(self.seed) & (2**64 - 1), i])
        return rng.uniform(self.box.lower, self.box.upper)

    def starts(self) -> np.ndarray:
        return np.array([self.start(i) for i in range(self.n_starts)])


@dataclass(frozen=True)
class LocalSolveResult:
    x: np.ndarray
    f: float
    converged: bool
    iterations: int
    max_violation: float = 0.0
    start_index: int = 0

    @property
    def feasible(self) -> bool:
        return self.max_violation <= FEAS_TOL


def fd_gradient(fun, x: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    h = step * np.maximum(1.0, np.abs(x))
    pts = np.concatenate([x + np.diag(h), x - np.diag(h)])
    vals = np.asarray(fun(pts), dtype=float)
    d = x.size
    return (vals[:d] - vals[d:]) / (2 * h)


def projected_gradient_norm(grad: np.ndarray, x: np.ndarray, box: DomainBox) -> float:
    g = grad.copy()
    at_lo = (x <= box.lower) & (g > 0)
    at_hi = (x >= box.upper) & (g < 0)
    g[at_lo | at_hi] = 0.0
    return float(np.max(np.abs(g))) if g.size else 0.0


def _checked(f):
    def fun(x):
        v = np.asarray(f(x), dtype=float)
        if not np.all(np.isfinite(v)):
            raise NonFiniteObjective(f"objective returned {v} at {x}")
        return v

    return fun


def _lbfgsb(fun, x0: np.ndarray, box: DomainBox, max_iters: int):
    bounds = list(zip(box.lower, box.upper))
    res = minimize(
        lambda x: float(fun(x)),
        x0,
        jac=lambda x: fd_gradient(fun, x),
        method="L-BFGS-B",
        bounds=bounds,
        options={"maxiter": max_iters, "gtol": GRAD_TOL, "ftol": 1e-15, "maxls": 50},
    )
    x = np.clip(res.x, box.lower, box.upper)
    pg = projected_gradient_norm(fd_gradient(fun, x), x, box)
    return x, int(res.nit), pg


def local_minimize(
    f: ObjectiveFn,
    x0,
    box: DomainBox,
    cs: ConstraintSet | None = None,
    max_iters: int = MAX_ITERS,
) -> LocalSolveResult:
    x0 = np.clip(np.asarray(x0, dtype=float), box.lower, box.upper)
    fun = _checked(f)
    fun(x0)
    if cs is None or cs.empty:
        x, nit, pg = _lbfgsb(fun, x0, box, max_iters)
        return LocalSolveResult(x, float(fun(x)), pg <= GRAD_TOL or nit < max_iters, nit)

    state = AlmState.initial(cs, INNER_ALM)
    prev = np.inf
    x, total = x0, 0
    converged = False
    for _ in range(INNER_ALM.max_iters):
        L = _checked(augmented_lagrangian(f, cs, state))
        x, nit, _ = _lbfgsb(L, x, box, max_iters)
        total += nit
        viol = cs.violation(x)
        if viol <= INNER_ALM.constraint_tol:
            converged = True
            break
        state = update_multipliers(state, x, cs)
        state = update_penalty(state, viol, prev, INNER_ALM)
        prev = viol
    return LocalSolveResult(x, float(fun(x)), converged, total, float(cs.violation(x)))


def _key(r: LocalSolveResult):
    return (not r.feasible, r.f if r.feasible else r.max_violation, r.start_index)


def multistart(
    f: ObjectiveFn,
    box: DomainBox,
    budget: StartBudget,
    cs: ConstraintSet | None = None,
) -> tuple[LocalSolveResult, list[LocalSolveResult]]:
    """Best feasible local solve over ``budget`` uniform starts (ties to the lower index)."""
    results = []
    for i in range(budget.n_starts):
        r = local_minimize(f, budget.start(i), box, cs)
        results.append(replace(r, start_index=i))
    return min(results, key=_key), results
