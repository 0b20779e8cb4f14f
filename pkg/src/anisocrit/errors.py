"""Exception types shared across the package."""

__all__ = [
    "DomainError",
    "SingularityError",
    "ConvergenceError",
    "AccuracyError",
    "FitError",
]


class DomainError(ValueError):
    """Input outside the admissible range of an operation."""


class SingularityError(DomainError):
    """Operation evaluated at a point where it is not defined (e.g. a
    gradient of a norm at the origin)."""


class ConvergenceError(RuntimeError):
    """Iteration failed to converge.  Carries the best value found so far
    in ``best`` when the caller can still make use of it."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class AccuracyError(RuntimeError):
    """Two independent computations of the same quantity disagree beyond
    the requested tolerance."""


class FitError(RuntimeError):
    """Least-squares fit is ill-conditioned or under-determined."""
