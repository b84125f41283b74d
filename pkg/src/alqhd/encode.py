"""One-hot encoding of grid-discretised separable objectives into Z-strings.

Variable ``j`` with ``r_j`` grid points owns qubits ``offset_j .. offset_j+r_j-1``
and grid value ``g_{j,k}`` is flagged by ``n_{j,k} = (I - Z_{j,k}) / 2``.  A
product term expands into Z-strings that touch at most one qubit per
variable, so the expansion is accumulated as dense coefficient blocks keyed
by the set of variables a string touches, then flattened into qubit supports.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .grid import Grid
from .objectives import SeparableExpr, eval_unifn

PRUNE_TOL = 1e-12
MAX_TERM_WIDTH = 6


class MissingGrid(KeyError):
    pass


class TermTooWide(ValueError):
    pass


@dataclass(frozen=True)
class QubitLayout:
    resolutions: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "resolutions", tuple(int(r) for r in self.resolutions))
        if any(r < 1 for r in self.resolutions):
            raise ValueError(f"resolutions must be positive: {self.resolutions}")

    @property
    def n_vars(self) -> int:
        return len(self.resolutions)

    @cached_property
    def offsets(self) -> tuple[int, ...]:
        return tuple(int(o) for o in np.concatenate([[0], np.cumsum(self.resolutions)[:-1]]))

    @property
    def n_qubits(self) -> int:
        return int(sum(self.resolutions))

    def qubit(self, j: int, k: int) -> int:
        if not 0 <= k < self.resolutions[j]:
            raise IndexError(f"grid index {k} out of range for variable {j}")
        return self.offsets[j] + k

    @cached_property
    def owner(self) -> np.ndarray:
        """Variable index owning each qubit."""
        return np.repeat(np.arange(self.n_vars), self.resolutions)


@dataclass(frozen=True)
class ZStringHamiltonian:
    terms: Mapping[tuple[int, ...], float]
    layout: QubitLayout

    def __post_init__(self):
        clean = {}
        for support, c in self.terms.items():
            key = tuple(sorted(int(q) for q in support))
            if len(set(key)) != len(key):
                raise ValueError(f"repeated qubit in support {support}")
            if key and key[-1] >= self.layout.n_qubits:
                raise IndexError(f"qubit {key[-1]} outside a {self.layout.n_qubits}-qubit layout")
            clean[key] = clean.get(key, 0.0) + float(c)
        object.__setattr__(self, "terms", dict(sorted(clean.items())))

    def __len__(self):
        return len(self.terms)

    def pruned(self, tol: float = PRUNE_TOL) -> "ZStringHamiltonian":
        return ZStringHamiltonian({s: c for s, c in self.terms.items() if abs(c) >= tol}, self.layout)

    def __add__(self, other: "ZStringHamiltonian") -> "ZStringHamiltonian":
        acc = dict(self.terms)
        for s, c in other.terms.items():
            acc[s] = acc.get(s, 0.0) + c
        return ZStringHamiltonian(acc, self.layout)

    def __mul__(self, a: float) -> "ZStringHamiltonian":
        return ZStringHamiltonian({s: a * c for s, c in self.terms.items()}, self.layout)

    __rmul__ = __mul__

    @cached_property
    def _packed(self):
        coefs = np.array(list(self.terms.values()), dtype=float)
        width = max((len(s) for s in self.terms), default=0)
        supp = np.full((len(self.terms), max(width, 1)), -1, dtype=np.int64)
        for i, s in enumerate(self.terms):
            supp[i, : len(s)] = s
        return coefs, supp

    def to_text(self) -> str:
        lines = ["# layout " + ",".join(map(str, self.layout.resolutions))]
        for s, c in self.terms.items():
            lines.append(f"{c:.17g}\t{','.join(map(str, s))}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, layout: QubitLayout | None = None) -> "ZStringHamiltonian":
        terms = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            if line.startswith("# layout"):
                layout = layout or QubitLayout(tuple(int(v) for v in line.split()[2].split(",")))
                continue
            if not line.strip() or line.startswith("#"):
                continue
            coef, _, qubits = line.partition("\t")
            try:
                key = tuple(int(q) for q in qubits.split(",")) if qubits.strip() else ()
                terms[key] = terms.get(key, 0.0) + float(coef)
            except ValueError as exc:
                raise ValueError(f"line {lineno}: cannot parse {line!r}") from exc
        if layout is None:
            raise ValueError("no layout given and no '# layout' header found")
        return cls(terms, layout)


# -- encoding -----------------------------------------------------------------


def _onehot_factor(values: np.ndarray) -> tuple[float, np.ndarray]:
    """``sum_k v_k (I - Z_k)/2`` as (identity coefficient, per-qubit Z coefficients)."""
    values = np.asarray(values, dtype=float)
    return 0.5 * float(values.sum()), -0.5 * values


class _BlockAccumulator:
    """Dense coefficient blocks keyed by the (sorted) set of variables a string touches."""

    def __init__(self, layout: QubitLayout):
        self.layout = layout
        self.blocks: dict[tuple[int, ...], np.ndarray] = {}

    def add(self, variables: tuple[int, ...], block) -> None:
        cur = self.blocks.get(variables)
        self.blocks[variables] = block if cur is None else cur + block

    def add_product(self, coef: float, factors: Sequence[tuple[int, float, np.ndarray]]) -> None:
        # each factor contributes either its identity part or its Z part
        for mask in itertools.product((False, True), repeat=len(factors)):
            scale = coef
            zparts = []
            for use_z, (j, ident, zs) in zip(mask, factors):
                if use_z:
                    zparts.append(zs)
                else:
                    scale *= ident
            if scale == 0.0:
                continue
            block = np.asarray(scale)
            for zs in zparts:
                block = np.multiply.outer(block, zs)
            self.add(tuple(j for use_z, (j, _, _) in zip(mask, factors) if use_z), block)

    def hamiltonian(self, prune_tol: float) -> ZStringHamiltonian:
        offs = self.layout.offsets
        terms: dict[tuple[int, ...], float] = {}
        for variables, block in sorted(self.blocks.items()):
            block = np.asarray(block)
            if not variables:
                if abs(float(block)) >= prune_tol:
                    terms[()] = float(block)
                continue
            idx = np.nonzero(np.abs(block) >= prune_tol)
            if not idx[0].size:
                continue
            qubits = np.stack([offs[j] + k for j, k in zip(variables, idx)], axis=1)
            for q, c in zip(map(tuple, qubits.tolist()), block[idx].tolist()):
                terms[q] = c
        return ZStringHamiltonian(terms, self.layout)


def encode_univariate(f_values, j: int, layout: QubitLayout, prune_tol: float = PRUNE_TOL) -> ZStringHamiltonian:
    f_values = np.asarray(f_values, dtype=float)
    if f_values.shape != (layout.resolutions[j],):
        raise ValueError(f"expected {layout.resolutions[j]} values for variable {j}, got {f_values.shape}")
    acc = _BlockAccumulator(layout)
    ident, zs = _onehot_factor(f_values)
    acc.add_product(1.0, [(j, ident, zs)])
    return acc.hamiltonian(prune_tol)


def grid_values(grid: Grid) -> list[np.ndarray]:
    return grid.axes()


def encode_expr(
    expr: SeparableExpr,
    grids: Sequence[np.ndarray] | Grid,
    layout: QubitLayout | None = None,
    prune_tol: float = PRUNE_TOL,
    max_term_width: int = MAX_TERM_WIDTH,
) -> ZStringHamiltonian:
    """Expand every product term across the one-hot registers and collect."""
    if isinstance(grids, Grid):
        grids = grids.axes()
    grids = list(grids)
    if layout is None:
        layout = QubitLayout(tuple(len(g) if g is not None else 1 for g in grids))
    acc = _BlockAccumulator(layout)
    for term in expr.terms:
        if len(term.factors) > max_term_width:
            raise TermTooWide(f"term touches {len(term.factors)} variables (limit {max_term_width})")
        factors = []
        for j, fn in term.factors:
            if j >= len(grids) or grids[j] is None:
                raise MissingGrid(f"no grid for variable {j}")
            factors.append((j, *_onehot_factor(eval_unifn(fn, grids[j]))))
        acc.add_product(term.coef, factors)
    return acc.hamiltonian(prune_tol)


def diagonal_on_onehot(H: ZStringHamiltonian, assignment: Sequence[int]) -> float:
    """Energy of the one-hot basis state selecting grid index ``assignment[j]`` per variable."""
    lay = H.layout
    if len(assignment) != lay.n_vars:
        raise IndexError(f"assignment has {len(assignment)} entries for {lay.n_vars} variables")
    on = np.zeros(lay.n_qubits + 1, dtype=bool)  # trailing slot absorbs -1 padding
    for j, k in enumerate(assignment):
        if not 0 <= k < lay.resolutions[j]:
            raise IndexError(f"grid index {k} out of range for variable {j}")
        on[lay.offsets[j] + k] = True
    coefs, supp = H._packed
    if not coefs.size:
        return 0.0
    flips = on[supp].sum(axis=1)
    return float(np.sum(np.where(flips % 2, -coefs, coefs)))


def locality_histogram(H: ZStringHamiltonian) -> dict[int, int]:
    hist: dict[int, int] = {}
    for s in H.terms:
        hist[len(s)] = hist.get(len(s), 0) + 1
    return dict(sorted(hist.items()))
