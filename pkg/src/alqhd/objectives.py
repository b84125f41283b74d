"""Benchmark objectives, constraint sets and product-separable expressions.

A :class:`SeparableExpr` is a sum of terms ``c * prod_j phi_j(x_j)`` where each
univariate ``phi_j`` is itself a product of tagged elementary factors.  The
tags are a closed set so the Hamiltonian encoder can evaluate every factor on
a per-variable grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .grid import DimensionMismatch

FACTOR_KINDS = ("const", "power", "cos", "sin", "exp")


@dataclass(frozen=True, order=True)
class Factor:
    """Elementary univariate factor.

    ``power``: ``t**a`` (``a`` a non-negative integer), ``cos``/``sin``/``exp``:
    ``fn(a*t + b)``, ``const``: the number ``a``.
    """

    kind: str
    a: float = 1.0
    b: float = 0.0

    def __post_init__(self):
        if self.kind not in FACTOR_KINDS:
            raise ValueError(f"unknown factor kind {self.kind!r}")
        if self.kind == "power" and (self.a < 0 or self.a != int(self.a)):
            raise ValueError(f"power factor needs a non-negative integer exponent, got {self.a}")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "power":
            return t ** int(self.a)
        if self.kind == "cos":
            return np.cos(self.a * t + self.b)
        if self.kind == "sin":
            return np.sin(self.a * t + self.b)
        if self.kind == "exp":
            return np.exp(self.a * t + self.b)
        return np.full_like(t, self.a)


UniFn = tuple[Factor, ...]


def _normalize_unifn(factors: Iterable[Factor]) -> tuple[float, UniFn]:
    """Fold constants into a scalar, merge powers, sort the rest."""
    scale = 1.0
    power = 0
    rest = []
    for f in factors:
        if f.kind == "const":
            scale *= f.a
        elif f.kind == "power":
            power += int(f.a)
        else:
            rest.append(f)
    if power:
        rest.append(Factor("power", power))
    return scale, tuple(sorted(rest))


def eval_unifn(fn: UniFn, t) -> np.ndarray:
    out = np.ones_like(np.asarray(t, dtype=float))
    for f in fn:
        out = out * f(t)
    return out


@dataclass(frozen=True)
class Term:
    coef: float
    factors: tuple[tuple[int, UniFn], ...] = ()

    def __post_init__(self):
        idx = [j for j, _ in self.factors]
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError(f"term variables must be strictly increasing, got {idx}")

    @property
    def variables(self) -> tuple[int, ...]:
        return tuple(j for j, _ in self.factors)

    @property
    def key(self):
        return self.factors


def make_term(coef: float, factors: Iterable[tuple[int, Iterable[Factor] | Factor]]) -> Term:
    """Build a term from unordered (variable, factor(s)) pairs, merging repeats."""
    by_var: dict[int, list[Factor]] = {}
    for j, fs in factors:
        fs = [fs] if isinstance(fs, Factor) else list(fs)
        by_var.setdefault(int(j), []).extend(fs)
    out = []
    for j in sorted(by_var):
        scale, fn = _normalize_unifn(by_var[j])
        coef *= scale
        if fn:
            out.append((j, fn))
    return Term(float(coef), tuple(out))


@dataclass(frozen=True)
class SeparableExpr:
    dim: int
    terms: tuple[Term, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        for t in self.terms:
            if t.factors and t.factors[-1][0] >= self.dim:
                raise DimensionMismatch(f"term uses variable {t.factors[-1][0]} in a {self.dim}-d expression")

    # construction helpers
    @classmethod
    def constant(cls, dim: int, c: float) -> "SeparableExpr":
        return cls(dim, (Term(float(c)),))

    @classmethod
    def variable(cls, dim: int, j: int, coef: float = 1.0) -> "SeparableExpr":
        return cls(dim, (make_term(coef, [(j, Factor("power", 1))]),))

    @classmethod
    def monomial(cls, dim: int, coef: float, factors) -> "SeparableExpr":
        return cls(dim, (make_term(coef, factors),))

    def collect(self, tol: float = 0.0) -> "SeparableExpr":
        """Merge terms with identical factor structure; drop |coef| <= tol."""
        acc: dict = {}
        for t in self.terms:
            acc[t.key] = acc.get(t.key, 0.0) + t.coef
        terms = tuple(Term(c, k) for k, c in acc.items() if abs(c) > tol)
        return SeparableExpr(self.dim, terms)

    def _check(self, other: "SeparableExpr"):
        if other.dim != self.dim:
            raise DimensionMismatch(f"cannot combine {self.dim}-d and {other.dim}-d expressions")

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = SeparableExpr.constant(self.dim, other)
        self._check(other)
        return SeparableExpr(self.dim, self.terms + other.terms)

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating)):
            return SeparableExpr(self.dim, tuple(Term(t.coef * float(other), t.factors) for t in self.terms))
        self._check(other)
        out = []
        for s in self.terms:
            for t in other.terms:
                out.append(make_term(s.coef * t.coef, list(s.factors) + list(t.factors)))
        return SeparableExpr(self.dim, tuple(out)).collect()

    __rmul__ = __mul__

    def square(self) -> "SeparableExpr":
        return self * self

    @property
    def width(self) -> int:
        """Largest number of distinct variables touched by a single term."""
        return max((len(t.factors) for t in self.terms), default=0)

    def __call__(self, x):
        return evaluate(self, x)


def evaluate(expr: SeparableExpr, x) -> np.ndarray | float:
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (expr.dim,):
        raise DimensionMismatch(f"point has trailing dimension {x.shape[-1:]} but expression is {expr.dim}-d")
    out = np.zeros(x.shape[:-1])
    for t in expr.terms:
        val = np.full(x.shape[:-1], t.coef)
        for j, fn in t.factors:
            val = val * eval_unifn(fn, x[..., j])
        out = out + val
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ObjectiveFn:
    """Black-box objective, vectorised over the trailing coordinate axis."""

    dim: int
    evaluator: Callable[[np.ndarray], np.ndarray]
    expr: SeparableExpr | None = None
    name: str = ""

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.dim,):
            raise DimensionMismatch(f"{self.name or 'objective'} expects {self.dim}-d points, got shape {x.shape}")
        out = np.asarray(self.evaluator(x), dtype=float)
        return float(out) if out.ndim == 0 else out

    @classmethod
    def from_expr(cls, expr: SeparableExpr, name: str = "") -> "ObjectiveFn":
        return cls(expr.dim, expr, expr, name)


@dataclass(frozen=True)
class ConstraintSet:
    """Equalities ``h(x) = 0`` and inequalities ``g(x) <= 0``."""

    equalities: tuple[ObjectiveFn, ...] = ()
    inequalities: tuple[ObjectiveFn, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "equalities", tuple(self.equalities))
        object.__setattr__(self, "inequalities", tuple(self.inequalities))
        dims = {c.dim for c in self.equalities + self.inequalities}
        if len(dims) > 1:
            raise DimensionMismatch(f"constraints disagree on dimension: {sorted(dims)}")

    @property
    def empty(self) -> bool:
        return not (self.equalities or self.inequalities)

    def eq_values(self, x) -> np.ndarray:
        return np.array([h(x) for h in self.equalities], dtype=float)

    def ineq_values(self, x) -> np.ndarray:
        return np.array([g(x) for g in self.inequalities], dtype=float)

    def violation(self, x) -> float:
        """max_i |h_i(x)| and max_i max(0, g_i(x)); 0 for an empty set."""
        parts = [0.0]
        if self.equalities:
            parts.append(float(np.max(np.abs(self.eq_values(x)))))
        if self.inequalities:
            parts.append(float(np.max(np.maximum(self.ineq_values(x), 0.0))))
        return max(parts)


# -- benchmarks ---------------------------------------------------------------

ACKLEY_SHIFT = (0.962, 0.370)


def ackley(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    r = np.sqrt(np.sum(x * x, axis=-1) / d)
    c = np.sum(np.cos(2 * np.pi * x), axis=-1) / d
    return -20.0 * np.exp(-0.2 * r) - np.exp(c) + 20.0 + math.e


def ackley_shifted(d: int = 2, shift: Sequence[float] = ACKLEY_SHIFT) -> ObjectiveFn:
    shift = np.asarray(shift, dtype=float)
    if d < 1 or shift.shape != (d,):
        raise DimensionMismatch(f"shift {shift} does not match dimension {d}")
    shift = shift.copy()
    return ObjectiveFn(d, lambda x: ackley(x - shift), None, "ackley")


def rastrigin_scaled(d: int = 2, alpha: float = 3.0) -> ObjectiveFn:
    if d < 1 or alpha <= 0:
        raise ValueError("rastrigin needs d >= 1 and alpha > 0")
    terms = [Term(10.0 * d)]
    for i in range(d):
        terms.append(make_term(alpha**2, [(i, Factor("power", 2))]))
        terms.append(make_term(-10.0, [(i, Factor("cos", 2 * np.pi * alpha))]))
    expr = SeparableExpr(d, tuple(terms))

    def f(x):
        ax = alpha * np.asarray(x, dtype=float)
        return 10.0 * d + np.sum(ax**2 - 10.0 * np.cos(2 * np.pi * ax), axis=-1)

    return ObjectiveFn(d, f, expr, f"rastrigin(alpha={alpha})")


def _curved_bound(lower_var: int, other: int, offset=0.5, curvature=0.020) -> ObjectiveFn:
    # offset + curvature*(x_other - offset)^2 - x_lower <= 0
    expr = (
        SeparableExpr.constant(2, offset + curvature * offset**2)
        + SeparableExpr.monomial(2, curvature, [(other, Factor("power", 2))])
        + SeparableExpr.variable(2, other, -2 * curvature * offset)
        + SeparableExpr.variable(2, lower_var, -1.0)
    )

    def g(x):
        x = np.asarray(x, dtype=float)
        return offset + curvature * (x[..., other] - offset) ** 2 - x[..., lower_var]

    return ObjectiveFn(2, g, expr, f"curved_bound_x{lower_var}")


def rastrigin_curved_constraints() -> ConstraintSet:
    return ConstraintSet(inequalities=(_curved_bound(0, 1), _curved_bound(1, 0)))
