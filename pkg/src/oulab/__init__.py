"""Ornstein-Uhlenbeck spectra on cylinder functions: L1 eigenfunctions, lifts and surveys."""
from .errors import (AccuracyError, ConfigError, DegeneracyError, DimensionError, DomainError,
                     NumericError, OULabError, ScopeError, StabilityError, ValidationError)

__version__ = "0.1.0"

__all__ = [
    "AccuracyError", "ConfigError", "DegeneracyError", "DimensionError", "DomainError",
    "NumericError", "OULabError", "ScopeError", "StabilityError", "ValidationError",
    "__version__",
]
