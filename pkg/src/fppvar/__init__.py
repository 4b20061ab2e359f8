"""Variance inequalities on the Gaussian cube and first passage percolation
Monte Carlo at desk scale."""

from . import (cli, cube_averaging, edge_distributions, experiments, fpp,
               gaussian, phi, poincare)

__version__ = "0.1.0"

__all__ = [
    "cli",
    "cube_averaging",
    "edge_distributions",
    "experiments",
    "fpp",
    "gaussian",
    "phi",
    "poincare",
    "__version__",
]
