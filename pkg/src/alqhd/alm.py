"""Augmented-Lagrangian outer loop with zoom-refined QHD as the inner solver.

Equalities use the classical ``lam*h + rho/2*h**2`` terms; inequalities
``g <= 0`` use the Rockafellar form ``(max(0, lam + rho*g)**2 - lam**2) / (2*rho)``
with the projected multiplier update.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .grid import DomainBox
from .objectives import ConstraintSet, ObjectiveFn
from .qhd import Schedule
from .zoom import ZoomConfig, ZoomTrace, refine


@dataclass(frozen=True)
class AlmConfig:
    rho0: float = 1.0
    gamma: float = 2.0
    rho_max: float = 1e9
    max_iters: int = 15
    constraint_tol: float = 1e-9
    violation_decrease_ratio: float = 0.25

    def __post_init__(self):
        if not (self.rho0 > 0 and self.gamma >= 1 and self.rho_max >= self.rho0
                and self.constraint_tol > 0 and self.max_iters >= 1):
            raise ValueError(f"invalid ALM configuration {self}")


@dataclass(frozen=True)
class IterRecord:
    x: np.ndarray
    violation: float
    objective: float
    rho: float


@dataclass(frozen=True)
class AlmState:
    lambda_eq: np.ndarray
    lambda_ineq: np.ndarray
    rho: float
    k: int = 0
    history: tuple[IterRecord, ...] = ()
    best_feasible: IterRecord | None = None

    @classmethod
    def initial(cls, cs: ConstraintSet, cfg: AlmConfig = AlmConfig()) -> "AlmState":
        return cls(np.zeros(len(cs.equalities)), np.zeros(len(cs.inequalities)), cfg.rho0)


@dataclass(frozen=True)
class AlmReport:
    x: np.ndarray
    objective: float
    violation: float
    iterations: int
    rho_final: float
    feasible: bool
    state: AlmState
    traces: tuple[ZoomTrace, ...] = field(default=(), repr=False)
    wall_time: float = 0.0


class NoFeasiblePointFound(RuntimeError):
    def __init__(self, report: AlmReport):
        super().__init__(f"no iterate met the constraint tolerance; best violation {report.violation:.3e}")
        self.report = report


def augmented_lagrangian(f: ObjectiveFn, cs: ConstraintSet, state: AlmState) -> ObjectiveFn:
    if cs.empty:
        return f
    lam_eq = np.array(state.lambda_eq, dtype=float)
    lam_in = np.array(state.lambda_ineq, dtype=float)
    rho = float(state.rho)
    eqs, ineqs = cs.equalities, cs.inequalities

    def L(x):
        out = np.asarray(f(x), dtype=float)
        for lam, h in zip(lam_eq, eqs):
            hv = h(x)
            out = out + lam * hv + 0.5 * rho * hv * hv
        for lam, g in zip(lam_in, ineqs):
            shifted = np.maximum(0.0, lam + rho * g(x))
            out = out + (shifted * shifted - lam * lam) / (2 * rho)
        return out

    expr = None
    if not ineqs and f.expr is not None and all(h.expr is not None for h in eqs):
        expr = f.expr
        for lam, h in zip(lam_eq, eqs):
            expr = expr + h.expr * float(lam) + h.expr.square() * (0.5 * rho)
        expr = expr.collect()
    return ObjectiveFn(f.dim, L, expr, f"AL[{f.name}]")


def update_multipliers(state: AlmState, x, cs: ConstraintSet) -> AlmState:
    lam_eq = state.lambda_eq + state.rho * cs.eq_values(x) if cs.equalities else state.lambda_eq
    lam_in = (np.maximum(0.0, state.lambda_ineq + state.rho * cs.ineq_values(x))
              if cs.inequalities else state.lambda_ineq)
    return replace(state, lambda_eq=lam_eq, lambda_ineq=lam_in, k=state.k + 1)


def update_penalty(state: AlmState, viol: float, prev_viol: float, cfg: AlmConfig) -> AlmState:
    """Multiply rho by gamma (capped) unless the violation shrank enough."""
    if viol > cfg.violation_decrease_ratio * prev_viol:
        return replace(state, rho=min(cfg.gamma * state.rho, cfg.rho_max))
    return state


def _better(a: IterRecord, b: IterRecord | None) -> bool:
    return b is None or a.objective < b.objective


def solve(
    f: ObjectiveFn,
    cs: ConstraintSet,
    box: DomainBox,
    zoom: ZoomConfig = ZoomConfig(),
    alm: AlmConfig = AlmConfig(),
    schedule: Schedule = Schedule(),
    scale_free: bool = True,
    raise_infeasible: bool = True,
) -> AlmReport:
    """AL-QHD: each subproblem is zoom-refined from ``box`` afresh."""
    t0 = time.perf_counter()
    state = AlmState.initial(cs, alm)
    prev_viol = 0.0  # nothing to credit on the first pass, so an infeasible start raises rho
    traces = []
    least_violating: IterRecord | None = None
    for _ in range(alm.max_iters):
        trace = refine(augmented_lagrangian(f, cs, state), box, zoom, schedule, scale_free)
        traces.append(trace)
        x = np.array(trace.best.position)
        viol = cs.violation(x)
        rec = IterRecord(x, viol, float(f(x)), state.rho)
        state = replace(state, history=state.history + (rec,))
        if least_violating is None or viol < least_violating.violation:
            least_violating = rec
        if viol <= alm.constraint_tol:
            if _better(rec, state.best_feasible):
                state = replace(state, best_feasible=rec)
            break
        state = update_multipliers(state, x, cs)
        state = update_penalty(state, viol, prev_viol, alm)
        prev_viol = viol

    chosen = state.best_feasible or least_violating
    report = AlmReport(
        x=chosen.x,
        objective=chosen.objective,
        violation=chosen.violation,
        iterations=len(state.history),
        rho_final=state.rho,
        feasible=state.best_feasible is not None,
        state=state,
        traces=tuple(traces),
        wall_time=time.perf_counter() - t0,
    )
    if not report.feasible and raise_infeasible:
        raise NoFeasiblePointFound(report)
    return report
