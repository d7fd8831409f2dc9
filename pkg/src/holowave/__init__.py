"""Singular Klein-Gordon equations on asymptotically anti-de Sitter patches.

Twisted-derivative calculus, boundary-layer peeling, energy-stable evolution
of the remainder, Picard iteration for a quadratic nonlinearity and a
harness that measures every inequality numerically.
"""

from .errors import HolowaveError
from .grid import RadialGrid
from .kernels import BACKEND
from .twisted import GridFunction, TwistParams

__version__ = "0.1.0"

__all__ = ["BACKEND", "GridFunction", "HolowaveError", "RadialGrid", "TwistParams",
           "__version__"]
