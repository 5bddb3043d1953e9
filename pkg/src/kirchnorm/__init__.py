"""Numerical toolkit for mass-constrained Kirchhoff problems with a
Sobolev-critical nonlinearity in dimension N >= 4."""

from .params import ProblemParams, critical_exponent
from .norms import NormTuple

__version__ = "0.1.0"

__all__ = ["ProblemParams", "NormTuple", "critical_exponent", "__version__"]
