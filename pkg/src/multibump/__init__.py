"""Numerical laboratory for normalized multibump standing waves of the
1D nonlinear Schrodinger equation with periodic potential.

Capabilities: spectral discretization on a periodic box, constrained
ground states via normalized gradient flow plus bordered Newton
refinement, nonlinear superposition of translated bumps, Morse-index and
nondegeneracy diagnostics of the linearization, semiclassical single-peak
families, and split-step time evolution for orbital (in)stability runs.
"""

__version__ = "0.1.0"

from .grid import Field, GridSpec
from .model import Nonlinearity, Potential
from .stationary import ConstrainedCriticalPoint

__all__ = [
    "__version__",
    "Field",
    "GridSpec",
    "Potential",
    "Nonlinearity",
    "ConstrainedCriticalPoint",
]
