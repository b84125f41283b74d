"""Adaptive zoom: rerun QHD on the high-probability box at fixed resolution."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .grid import DomainBox, Grid, marginal, probability_density
from .objectives import ObjectiveFn
from .qhd import Schedule, evolve

MIN_WIDTH_EPS = 64


class DegenerateBox(ValueError):
    pass


@dataclass(frozen=True)
class ZoomConfig:
    levels: int = 1
    eta: float = 0.99
    resolution: int | tuple[int, ...] = 32
    polish: bool = False

    def __post_init__(self):
        if self.levels < 1:
            raise ValueError(f"zoom levels must be >= 1, got {self.levels}")
        if not 0 < self.eta <= 1:
            raise ValueError(f"eta must lie in (0, 1], got {self.eta}")


@dataclass(frozen=True)
class LevelRecord:
    level: int
    box: DomainBox
    resolution: tuple[int, ...]
    index: tuple[int, ...]
    position: np.ndarray
    value: float
    wall_time: float
    norm_drift: float = 0.0

    @property
    def spacing(self) -> np.ndarray:
        return self.box.widths / np.array(self.resolution)


@dataclass(frozen=True)
class ZoomTrace:
    levels: tuple[LevelRecord, ...]
    best: LevelRecord
    stopped_early: bool = False
    polished: tuple[np.ndarray, float] | None = None

    def best_after(self, z: int) -> LevelRecord:
        """Incumbent after the first ``z`` levels (what a ``z``-level run returns)."""
        recs = self.levels[: max(1, z)]
        best = recs[0]
        for rec in recs[1:]:
            if rec.value < best.value:
                best = rec
        return best


def _res_tuple(d: int, res) -> tuple[int, ...]:
    res = tuple(int(r) for r in np.atleast_1d(res))
    return res * d if len(res) == 1 else res


def interval_from_marginal(pj, eta: float) -> tuple[int, int]:
    """Grow an index interval around the marginal peak until it holds ``eta`` mass.

    Each step adds the neighbour with the larger marginal (lower side on ties).
    """
    pj = np.asarray(pj, dtype=float)
    n = pj.size
    lo = hi = int(np.argmax(pj))
    mass = pj[lo]
    while mass < eta and (lo > 0 or hi < n - 1):
        if lo == 0:
            hi += 1
            mass += pj[hi]
        elif hi == n - 1 or pj[lo - 1] >= pj[hi + 1]:
            lo -= 1
            mass += pj[lo]
        else:
            hi += 1
            mass += pj[hi]
    return lo, hi


def next_box(p, grid: Grid, eta: float, outer: DomainBox) -> DomainBox:
    lower = np.empty(grid.dim)
    upper = np.empty(grid.dim)
    for j in range(grid.dim):
        lo, hi = interval_from_marginal(marginal(p, grid, j), eta)
        lower[j] = grid.cell_edges(j, lo)[0]
        upper[j] = grid.cell_edges(j, hi)[1]
    lower = np.maximum(lower, outer.lower)
    upper = np.minimum(upper, outer.upper)
    centre = 0.5 * (lower + upper)
    min_width = MIN_WIDTH_EPS * (np.finfo(float).eps * np.abs(centre) + np.finfo(float).tiny)
    if np.any(upper - lower < min_width):
        raise DegenerateBox(f"zoom box collapsed to widths {upper - lower}")
    return DomainBox(lower, upper)


def refine(
    f: ObjectiveFn,
    box0: DomainBox,
    cfg: ZoomConfig = ZoomConfig(),
    schedule: Schedule = Schedule(),
    scale_free: bool = True,
) -> ZoomTrace:
    res = _res_tuple(box0.dim, cfg.resolution)
    box = box0
    records: list[LevelRecord] = []
    best = None
    stopped = False
    for z in range(cfg.levels):
        grid = Grid(box, res)
        t0 = time.perf_counter()
        sim = evolve(f, grid, schedule, scale_free=scale_free)
        cand = sim.candidate
        rec = LevelRecord(z + 1, box, res, cand.index, cand.position, cand.value,
                          time.perf_counter() - t0, sim.norm_drift)
        records.append(rec)
        if best is None or rec.value < best.value:
            best = rec
        if z == cfg.levels - 1:
            break
        try:
            box = next_box(probability_density(sim.final_psi), grid, cfg.eta, box)
        except DegenerateBox:
            # double precision exhausted; keep the incumbent
            stopped = True
            break

    polished = None
    if cfg.polish:
        from .baseline import local_minimize

        sol = local_minimize(f, best.position, box0)
        polished = (sol.x, sol.f)
    return ZoomTrace(tuple(records), best, stopped, polished)
