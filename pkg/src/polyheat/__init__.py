"""Spectral simulation of polyharmonic heat flows on R^N and on the cylinder R x (0, 1)."""

__version__ = "0.1.0"

from .errors import (BracketError, DivergenceError, HypothesisError, NumericalError, PolyheatError,
                     QuadratureError, ResolutionError, ResolutionWarning, TruncationWarning,
                     ValidationError)
from .spectral_core import (FractionalPower, Grid, Polynomial, SpectralField, evaluate_symbol,
                            forward_transform, inverse_transform, propagate)

__all__ = [
    "__version__",
    "BracketError", "DivergenceError", "HypothesisError", "NumericalError", "PolyheatError",
    "QuadratureError", "ResolutionError", "ResolutionWarning", "TruncationWarning", "ValidationError",
    "FractionalPower", "Grid", "Polynomial", "SpectralField", "evaluate_symbol", "forward_transform",
    "inverse_transform", "propagate",
]
