"""Exception and warning types shared across the package."""


class SpecMeasureError(Exception):
    """Base class for all errors raised by specmeasure."""


class InvalidArgumentError(SpecMeasureError, ValueError):
    pass


class SingularSystemError(SpecMeasureError):
    """A linear system (Vandermonde or shifted) could not be factored."""


class ShiftOnRealAxisError(SpecMeasureError, ValueError):
    """The requested shift has zero imaginary part; the resolvent may not exist."""


class InvalidOperatorError(SpecMeasureError, ValueError):
    """An operator description violates self-adjointness or is unsupported."""


class InvalidPencilError(InvalidOperatorError):
    """The B operator of a pencil is not positive."""


class UnsupportedOrderError(InvalidOperatorError):
    pass


class BasisMismatchError(SpecMeasureError, ValueError):
    pass


class NoConvergenceError(SpecMeasureError):
    """Raised by strict callers; the engine normally downgrades this to a warning."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class ConditioningWarning(UserWarning):
    pass


class AccuracyWarning(UserWarning):
    pass
