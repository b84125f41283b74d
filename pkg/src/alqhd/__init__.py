"""Grid-simulated quantum Hamiltonian descent with zoom refinement and an
augmented-Lagrangian outer loop, plus one-hot Hamiltonian encoding, gate-count
estimates and ACOPF model construction."""

from .grid import DomainBox, Grid
from .objectives import ConstraintSet, ObjectiveFn, SeparableExpr
from .qhd import Schedule, evolve
from .zoom import ZoomConfig, refine
from .alm import AlmConfig, solve

__all__ = [
    "AlmConfig",
    "ConstraintSet",
    "DomainBox",
    "Grid",
    "ObjectiveFn",
    "Schedule",
    "SeparableExpr",
    "ZoomConfig",
    "evolve",
    "refine",
    "solve",
]
