"""Exception hierarchy shared by all sbmkit modules."""


class SbmkitError(Exception):
    """Base class for toolkit errors."""


class ParameterError(SbmkitError, ValueError):
    """Invalid family/domain/config parameters at construction time."""


class DomainError(SbmkitError, ValueError):
    """Argument outside the domain of a function (e.g. lambda <= 0)."""


class NumericalError(SbmkitError, ArithmeticError):
    """Base for quadrature and inversion failures (CLI exit code 3)."""


class QuadratureError(NumericalError):
    def __init__(self, message, error_estimate=float("nan")):
        super().__init__(f"{message} (error estimate {error_estimate:.3g})")
        self.error_estimate = error_estimate


class InversionError(NumericalError):
    def __init__(self, message, residual=float("nan")):
        super().__init__(f"{message} (residual {residual:.3g})")
        self.residual = residual


class TransienceError(SbmkitError):
    """Free Green function requested for a recurrent process (d=2 without A1)."""


class HorizonExceeded(SbmkitError):
    """A simulated path was still inside the domain at t_max."""


class ConfigError(SbmkitError):
    """Malformed run configuration (CLI exit code 2)."""

    def __init__(self, message, key=None):
        super().__init__(message if key is None else f"{key}: {message}")
        self.key = key
