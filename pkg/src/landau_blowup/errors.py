"""Exception and warning types raised across the package."""


class LandauError(Exception):
    """Base class for all package errors."""


class ConfigurationError(LandauError, ValueError):
    """Invalid parameters, grids or option combinations."""


class DataError(LandauError, ValueError):
    """Non-finite or otherwise unusable field data."""


class PreconditionError(LandauError, ValueError):
    """An input violates a mathematical precondition (sign, constraint, ...)."""


class DegenerateFieldError(LandauError, ValueError):
    """A normalising denominator vanishes."""


class ConstructionError(LandauError, RuntimeError):
    """The weight construction could not be completed."""


class NumericalError(LandauError, RuntimeError):
    """A linear-algebra or eigenvalue computation failed."""


class StepError(LandauError, RuntimeError):
    """A time step diverged; carries the diagnostics gathered so far."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class TruncationWarning(UserWarning):
    """The integrand is not negligible at the outer radius."""
