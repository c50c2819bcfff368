"""Exception hierarchy shared by all satolab modules."""


class SatoError(Exception):
    """Base class for toolkit errors."""


class SpecError(SatoError, ValueError):
    """Invalid process specification or profile."""


class QuadratureFailure(SatoError):
    pass


class SamplerUnavailable(SatoError):
    pass


class RouteUnavailable(SamplerUnavailable):
    pass


class DensityUnavailable(SatoError):
    pass


class InvalidCutoff(SatoError, ValueError):
    pass


class HorizonTooShort(SatoError):
    pass


class GridTooShort(SatoError, ValueError):
    pass


class ConvolutionOverflow(SatoError):
    pass


class InsufficientSamples(SatoError, ValueError):
    pass


class PreconditionFailed(SatoError):
    pass


class NotConstructible(SatoError):
    pass


class BudgetExceeded(SatoError):
    pass


class HypothesisViolated(SatoError):
    pass


class QValidationFailed(SatoError, ValueError):
    pass


class Inconclusive(SatoError):
    """Raised by predict_C when no rule applies; carries the hypothesis trail."""

    def __init__(self, message, trail=()):
        super().__init__(message)
        self.trail = list(trail)


class ConfigError(SatoError, ValueError):
    pass
