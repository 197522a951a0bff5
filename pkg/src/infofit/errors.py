"""Exception types raised across the package."""


class InfoFitError(Exception):
    """Base class for all package errors."""


class TooFewSamples(InfoFitError, ValueError):
    pass


class LengthMismatch(InfoFitError, ValueError):
    pass


class DimensionMismatch(InfoFitError, ValueError):
    pass


class NonPositiveSigma(InfoFitError, ValueError):
    pass


class SingularTime(InfoFitError, ValueError):
    """Raised when the model is evaluated at t <= 0, where 1/t**rho blows up."""


class NonFiniteState(InfoFitError, ArithmeticError):
    def __init__(self, message, phase_index=None, series_index=None):
        super().__init__(message)
        self.phase_index = phase_index
        self.series_index = series_index


class DegeneratePool(InfoFitError, ValueError):
    pass


class ConfigError(InfoFitError, ValueError):
    """Invalid or unknown configuration fields."""
