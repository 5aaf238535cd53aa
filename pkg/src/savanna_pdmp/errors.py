"""Exception hierarchy shared by all modules."""


class SavannaError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(SavannaError, ValueError):
    """Model parameters fail validation."""


class NonPositiveRate(ParameterError):
    pass


class LossFractionOutOfRange(ParameterError):
    pass


class IntensityViolatesAssumptions(ParameterError):
    pass


class DomainConsistencyError(SavannaError):
    """A state left [0,1]^2 by more than the clamping tolerance."""


class DomainError(SavannaError, ValueError):
    """Input outside the domain on which an operation is defined."""


class IntegratorFailure(SavannaError):
    pass


class InvalidBound(SavannaError):
    """The declared intensity bound was exceeded during thinning."""


class TimeOutOfRange(SavannaError, ValueError):
    pass


class GridMismatch(SavannaError, ValueError):
    pass


class CflViolation(SavannaError, ValueError):
    pass


class NegativeDensity(SavannaError):
    pass


class NotConverged(SavannaError):
    """Steady-state iteration hit its time budget.

    The last iterate and the residual it achieved are attached.
    """

    def __init__(self, message, last=None, residual=None, t=None):
        super().__init__(message)
        self.last = last
        self.residual = residual
        self.t = t


class NoDeltaFound(SavannaError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class InvalidResolution(SavannaError, ValueError):
    pass


class ScheduleNotFound(SavannaError):
    def __init__(self, message, budget=None, best_distance=None):
        super().__init__(message)
        self.budget = budget
        self.best_distance = best_distance


class ConfigError(SavannaError, ValueError):
    pass
