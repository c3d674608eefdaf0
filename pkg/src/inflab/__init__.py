"""Numerical laboratory for the infinitesimal model with convex selection.

Densities are carried as negative logs on uniform grids (:mod:`inflab.grid`);
:mod:`inflab.model` holds the generation operators, :mod:`inflab.eigen` the
eigenpair solver, :mod:`inflab.metrics` the divergences, :mod:`inflab.transport`
the optimal-transport checks and :mod:`inflab.analysis` the experiment runs.
"""

from .eigen import (
    EigenResult,
    contraction_factor,
    quadratic_lambda_oracle,
    quadratic_sigma2,
    solve_alpha,
    solve_eigen,
)
from .grid import Grid1D, Grid2D, LogDensity, default_grid
from .model import SelectionSpec, TruncationSpec, apply_A, apply_B, apply_T

__version__ = "0.1.0"

__all__ = [
    "EigenResult",
    "Grid1D",
    "Grid2D",
    "LogDensity",
    "SelectionSpec",
    "TruncationSpec",
    "apply_A",
    "apply_B",
    "apply_T",
    "contraction_factor",
    "default_grid",
    "quadratic_lambda_oracle",
    "quadratic_sigma2",
    "solve_alpha",
    "solve_eigen",
]
