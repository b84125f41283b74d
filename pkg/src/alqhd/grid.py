"""Search boxes, tensor-product grids and densities over them.

Grid points are laid out on the periodic lattice ``lower + k * dx`` for
``k = 0 .. r-1`` with ``dx = (upper - lower) / r``; cell ``k`` spans
``[lower + k*dx, lower + (k+1)*dx)``.  Amplitudes are stored as a dense
``ndarray`` of shape ``resolution`` (row-major multi-index order).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

NORM_TOL = 1e-9


class ZeroNorm(ValueError):
    pass


class AxisOutOfRange(IndexError):
    pass


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class DomainBox:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float)).copy()
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float)).copy()
        if lo.ndim != 1 or lo.shape != hi.shape or lo.size < 1:
            raise DimensionMismatch(f"bad box bounds {lo!r}, {hi!r}")
        if not np.all(lo < hi):
            raise ValueError(f"box requires lower < upper, got {lo} / {hi}")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def cube(cls, lo: float, hi: float, d: int) -> "DomainBox":
        return cls(np.full(d, float(lo)), np.full(d, float(hi)))

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    def contains(self, other: "DomainBox") -> bool:
        return bool(np.all(other.lower >= self.lower) and np.all(other.upper <= self.upper))

    def __eq__(self, other):
        if not isinstance(other, DomainBox):
            return NotImplemented
        return np.array_equal(self.lower, other.lower) and np.array_equal(self.upper, other.upper)

    def __hash__(self):
        return hash((self.lower.tobytes(), self.upper.tobytes()))


@dataclass(frozen=True)
class Grid:
    box: DomainBox
    resolution: tuple[int, ...]
    spacing: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        res = tuple(int(r) for r in np.atleast_1d(self.resolution))
        if len(res) == 1 and self.box.dim > 1:
            res = res * self.box.dim
        if len(res) != self.box.dim:
            raise DimensionMismatch(f"resolution {res} does not match box dimension {self.box.dim}")
        if any(r < 1 for r in res):
            raise ValueError(f"resolution must be positive, got {res}")
        object.__setattr__(self, "resolution", res)
        object.__setattr__(self, "spacing", self.box.widths / np.array(res))

    @property
    def dim(self) -> int:
        return self.box.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return self.resolution

    @property
    def size(self) -> int:
        return int(np.prod(self.resolution))

    def axis_points(self, axis: int) -> np.ndarray:
        """Coordinates of the grid points along one axis."""
        return self.box.lower[axis] + np.arange(self.resolution[axis]) * self.spacing[axis]

    def axes(self) -> list[np.ndarray]:
        return [self.axis_points(j) for j in range(self.dim)]

    def point(self, index: Sequence[int]) -> np.ndarray:
        idx = np.asarray(index)
        return self.box.lower + idx * self.spacing

    def points(self) -> np.ndarray:
        """All grid points as an array of shape ``resolution + (d,)``."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack(mesh, axis=-1)

    def cell_edges(self, axis: int, k: int) -> tuple[float, float]:
        lo = self.box.lower[axis]
        return lo + k * self.spacing[axis], lo + (k + 1) * self.spacing[axis]


@dataclass(frozen=True)
class Wavefunction:
    grid: Grid
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.size != self.grid.size:
            raise DimensionMismatch(f"{amps.size} amplitudes for a grid of {self.grid.size} points")
        object.__setattr__(self, "amplitudes", amps.reshape(self.grid.shape))

    def norm_sq(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)


def uniform_state(grid: Grid) -> Wavefunction:
    amps = np.full(grid.shape, 1.0 / np.sqrt(grid.size), dtype=complex)
    return Wavefunction(grid, amps)


def probability_density(psi: Wavefunction) -> np.ndarray:
    p = np.abs(psi.amplitudes) ** 2
    total = p.sum()
    if total == 0:
        raise ZeroNorm("wavefunction has zero norm")
    return p / total


def marginal(p: np.ndarray, grid: Grid, axis: int) -> np.ndarray:
    if not 0 <= axis < grid.dim:
        raise AxisOutOfRange(f"axis {axis} out of range for a {grid.dim}-d grid")
    p = np.asarray(p, dtype=float).reshape(grid.shape)
    others = tuple(j for j in range(grid.dim) if j != axis)
    return p.sum(axis=others) if others else p.copy()


def argmax_point(p: np.ndarray, grid: Grid) -> tuple[tuple[int, ...], np.ndarray]:
    """Most probable grid point; ties go to the first index in row-major order."""
    p = np.asarray(p).reshape(grid.shape)
    flat = int(np.argmax(p))  # np.argmax returns the first occurrence
    idx = tuple(int(i) for i in np.unravel_index(flat, grid.shape))
    return idx, grid.point(idx)
