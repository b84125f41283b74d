"""Per-Trotter-step gate counts under NISQ and fault-tolerant cost models.

Kinetic costs use fixed per-variable constants from a compiled one-register
template (44 two-qubit gates; 42 generic rotations plus 2 exact T gates).
Each k-local potential Z-string costs 2(k-1) CNOTs and one Rz rotation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal

import numpy as np

from .encode import ZStringHamiltonian

KINETIC_HARD_PER_VAR = 44
KINETIC_ROTATIONS_PER_VAR = 42
KINETIC_T_PER_VAR = 2
RUN_ACCURACY = 1e-6


class DegenerateSeries(ValueError):
    pass


@dataclass(frozen=True)
class NisqCost:
    hard_two_qubit: int
    easy_single_qubit: int

    @property
    def total(self) -> int:
        return self.hard_two_qubit + self.easy_single_qubit


@dataclass(frozen=True)
class FtCost:
    exact_t: int
    rotations_kinetic: int
    rotations_potential: int
    clifford: int
    synthesis_factor: float

    @property
    def synthesized_t(self) -> int:
        return math.ceil(self.synthesis_factor * (self.rotations_kinetic + self.rotations_potential))

    @property
    def t_total(self) -> int:
        return self.exact_t + self.synthesized_t

    @property
    def potential_t(self) -> float:
        return self.synthesis_factor * self.rotations_potential


@dataclass(frozen=True)
class SynthesisModel:
    """Average T gates per synthesised Rz: ``a * log2(1/eps) + b``, clamped at 0."""

    a: float = 3.0
    b: float = 4.0

    def __post_init__(self):
        if self.a <= 0:
            raise ValueError(f"synthesis slope must be positive, got {self.a}")

    def __call__(self, eps: float) -> float:
        return max(0.0, self.a * math.log2(1.0 / eps) + self.b)


@dataclass(frozen=True)
class ResourceReport:
    n_vars: int
    nisq: NisqCost
    ft: FtCost
    epsilon: float
    trotter_steps: int = 1

    def record(self) -> dict:
        m = self.trotter_steps
        return {
            "n_vars": self.n_vars,
            "nisq_hard": self.nisq.hard_two_qubit * m,
            "nisq_easy": self.nisq.easy_single_qubit * m,
            "ft_NtK": self.ft.exact_t * m,
            "ft_NrK": self.ft.rotations_kinetic * m,
            "ft_NrV": self.ft.rotations_potential * m,
            "ft_clifford": self.ft.clifford * m,
            "epsilon": self.epsilon,
            "r_eps": self.ft.synthesis_factor,
            "t_total": self.ft.t_total * m,
            "trotter_steps": m,
        }


def kinetic_nisq(n_vars: int, easy_per_var: int = 0) -> NisqCost:
    return NisqCost(KINETIC_HARD_PER_VAR * n_vars, easy_per_var * n_vars)


def kinetic_ft(n_vars: int) -> tuple[int, int]:
    return KINETIC_T_PER_VAR * n_vars, KINETIC_ROTATIONS_PER_VAR * n_vars


def potential_cost(H: ZStringHamiltonian) -> tuple[int, int]:
    """(two-qubit gates, Rz rotations) for the parity decomposition of ``H``."""
    two_qubit = 0
    rotations = 0
    for support in H.terms:
        if support:
            two_qubit += 2 * (len(support) - 1)
            rotations += 1
    return two_qubit, rotations


def rotation_tolerance(n_rotations: int, run_accuracy: float = RUN_ACCURACY) -> float:
    if n_rotations < 1 or run_accuracy <= 0:
        raise ValueError("need at least one rotation and a positive accuracy")
    # divide the shortest decimal form so 1e-6 / 1000 lands on 1e-9, not one ulp below
    return float(Decimal(repr(float(run_accuracy))) / n_rotations)


def estimate(
    H: ZStringHamiltonian,
    n_vars: int,
    model: SynthesisModel = SynthesisModel(),
    run_accuracy: float = RUN_ACCURACY,
    kinetic_easy_per_var: int = 0,
) -> ResourceReport:
    pot_2q, n_rv = potential_cost(H)
    kin = kinetic_nisq(n_vars, kinetic_easy_per_var)
    # diagonal Rz in the potential block are frame updates, hence easy
    nisq = NisqCost(kin.hard_two_qubit + pot_2q, kin.easy_single_qubit + n_rv)
    n_tk, n_rk = kinetic_ft(n_vars)
    n_r = n_rk + n_rv
    eps = rotation_tolerance(n_r, run_accuracy) if n_r else run_accuracy
    # kinetic entanglers are folded into the Clifford count alongside the CNOT ladders
    ft = FtCost(n_tk, n_rk, n_rv, pot_2q + kin.hard_two_qubit, model(eps))
    return ResourceReport(n_vars, nisq, ft, eps)


def fit_power_law(series) -> tuple[float, float, float]:
    """Least squares in log-log space: ``count ~ c * n**p``; returns (c, p, R^2)."""
    arr = np.asarray(series, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 3:
        raise ValueError("need at least three (n, count) points")
    if np.any(arr <= 0):
        raise ValueError("power-law fit needs positive n and counts")
    x, y = np.log(arr[:, 0]), np.log(arr[:, 1])
    if np.ptp(x) == 0:
        raise DegenerateSeries("all n values are equal")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 1.0
    return float(np.exp(intercept)), float(slope), float(r2)

