"""Spectral toolkit for homogenization of periodic Maxwell media:
effective tensors from cell problems, low-energy Bloch branch analysis,
and corrector-based convergence studies for the time-dependent system."""

__version__ = "0.1.0"

from .lattice import Lattice, cubic_lattice
from .coefficients import CoefficientSet, FAMILIES
from .cell import CorrectorSet, solve_cell_problems
from .germ import analyze_germ, germ_spectrum
from .bloch import FiberOperator, branch_fit, fiber_eigs, fiber_spectrum_sweep
from .wave import propagate_eps, propagate_homogenized
from .harness import rate_fit, sweep, tau_scaling_probe

__all__ = [
    "Lattice",
    "cubic_lattice",
    "CoefficientSet",
    "FAMILIES",
    "CorrectorSet",
    "solve_cell_problems",
    "analyze_germ",
    "germ_spectrum",
    "FiberOperator",
    "fiber_eigs",
    "fiber_spectrum_sweep",
    "branch_fit",
    "propagate_eps",
    "propagate_homogenized",
    "sweep",
    "rate_fit",
    "tau_scaling_probe",
    "__version__",
]
