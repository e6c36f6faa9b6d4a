"""Exception and warning types raised across the package."""


class SupJumpError(Exception):
    """Base class for all errors raised by supjump."""


class NonstationaryError(SupJumpError, ValueError):
    """The first jump moment M1 is not in [0, 1)."""


class DivergentMassError(SupJumpError, ValueError):
    """The integral of 1/r against the mixing measure diverges."""


class UnsupportedModelError(SupJumpError):
    """The requested statistic has no closed form for this model kind."""


class NumericalError(SupJumpError, ArithmeticError):
    """A special-function or root evaluation failed."""


class SolverInstabilityError(SupJumpError):
    """A time-stepper left the region guaranteed by the a-priori bounds."""


class NumericsError(SupJumpError):
    """Two independent numerical routes disagree beyond tolerance."""


class SimulationError(SupJumpError):
    """The Monte Carlo step size is too coarse for the jump intensity."""


class ConfigError(SupJumpError, ValueError):
    """Inconsistent configuration (horizon vs lags, bad flags, ...)."""


class EmptySeriesError(SupJumpError, ValueError):
    """A count series has no positive entries."""


class DegenerateSeriesError(SupJumpError, ValueError):
    """A count series has zero variance or too few points."""


class ParseError(SupJumpError, ValueError):
    """Malformed CSV or JSON input."""


class FitFailure(SupJumpError):
    """Parameter identification did not produce a usable estimate."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class TruncationWarning(UserWarning):
    """A time integral was cut at T_max with a non-negligible tail."""


class StepSizeWarning(UserWarning):
    """Per-step jump probability is large enough to bias the simulation."""
