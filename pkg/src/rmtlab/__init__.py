"""Numerical toolkit for unitary-invariant random matrix ensembles."""

from .errors import NumericalError
from .potential import Potential

__version__ = "0.1.0"
__all__ = ["NumericalError", "Potential", "__version__"]
