"""Exception types shared across the package."""


class EwensKitError(Exception):
    """Base class for all package errors."""


class DomainError(EwensKitError, ValueError):
    """An input lies outside the domain where the quantity is defined."""


class CapacityError(EwensKitError, ValueError):
    """A request exceeds a configured enumeration or table capacity."""


class ConditioningError(DomainError):
    """The conditioning event of a conditioned sampler has probability zero."""


class EstimateUndefinedError(DomainError):
    """Every importance weight in a batch vanished."""

    def __init__(self, message, n_samples=0, n_zero=0):
        super().__init__(message)
        self.n_samples = n_samples
        self.n_zero = n_zero


class OracleMismatchError(EwensKitError, ArithmeticError):
    """Two independent exact computations of the same quantity disagree."""
