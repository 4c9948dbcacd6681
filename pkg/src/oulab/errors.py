"""Exception hierarchy shared by every oulab module."""


class OULabError(Exception):
    """Base class for all library errors."""


class DimensionError(OULabError, ValueError):
    pass


class ValidationError(OULabError, ValueError):
    pass


class DomainError(OULabError, ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class StabilityError(OULabError):
    """Drift matrix is not stable, so no invariant measure exists."""


class DegeneracyError(OULabError):
    """A covariance that must be nondegenerate is (numerically) singular."""


class NumericError(OULabError, ArithmeticError):
    pass


class AccuracyError(NumericError):
    """A quadrature or integrator failed to reach the requested tolerance."""


class ScopeError(OULabError):
    """The request is valid but handled by a different routine."""


class ConfigError(OULabError, ValueError):
    pass
