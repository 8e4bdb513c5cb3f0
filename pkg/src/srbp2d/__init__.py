"""Simulation and numerical-verification laboratory for the 2D
self-repelling Brownian polymer under weak coupling."""

__version__ = "1.0.0"

from . import (envgen, experiments, fock, kernels, polymer, sltecheck,
               spectral, stats)
from .kernels import ANALYTIC_MOLLIFIER, Mollifier
from .polymer import CouplingSchedule, OccupationDrift, Trajectory, run_path

__all__ = [
    "__version__", "ANALYTIC_MOLLIFIER", "Mollifier", "CouplingSchedule",
    "OccupationDrift", "Trajectory", "run_path", "envgen", "experiments",
    "fock", "kernels", "polymer", "sltecheck", "spectral", "stats",
]
