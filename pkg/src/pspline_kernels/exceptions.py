"""Exception and warning types raised by the library."""


class DomainError(ValueError):
    """An evaluation point lies outside the domain of the object being evaluated."""


class InvalidOrderError(ValueError):
    """A derivative, difference or penalty order is out of the supported range."""


class DimensionError(ValueError):
    """Matrix or sequence sizes are inconsistent."""


class ConfigurationError(ValueError):
    """A fit or simulation configuration violates its invariants."""


class UnsupportedError(ValueError):
    """The requested combination of options is not implemented."""


class SingularSystemError(ArithmeticError):
    """A linear system that must be solved uniquely is (numerically) singular."""


class SmallBetaWarning(UserWarning):
    """The inverse bandwidth is below the documented floor for boundary kernels."""


class BoundaryTruncationWarning(UserWarning):
    """A quadrature over [0, 1] is affected by the boundary more than requested."""
