"""Exception types raised across the package."""


class RobustFitError(Exception):
    """Base class for all package errors."""


class ShapeError(RobustFitError, ValueError):
    pass


class RankDeficient(RobustFitError, ValueError):
    pass


class ParameterError(RobustFitError, ValueError):
    """A scalar parameter is outside its admissible range."""


class NonPositiveGamma(ParameterError):
    pass


class NonPositiveSigma(ParameterError):
    pass


class NotConverged(RobustFitError, RuntimeError):
    """Iteration budget exhausted before the stopping test held.

    The last iterate is attached as ``fit`` so callers can still inspect it.
    """

    def __init__(self, message, fit=None):
        super().__init__(message)
        self.fit = fit


class TooLarge(RobustFitError, ValueError):
    """An exhaustive computation would exceed its enumeration guard."""


class Degenerate(RobustFitError, ValueError):
    pass


class DegenerateDirection(Degenerate):
    pass


class DegenerateB(Degenerate):
    pass


class DualInfeasible(RobustFitError, ValueError):
    pass


class InvalidK(RobustFitError, ValueError):
    pass


class KExceedsM(InvalidK):
    pass


class KTooLarge(InvalidK):
    pass


class SolverFailure(RobustFitError, RuntimeError):
    pass


class IoError(RobustFitError, OSError):
    pass
