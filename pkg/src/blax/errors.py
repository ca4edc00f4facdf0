"""Exception hierarchy shared by every blax module."""


class BlaxError(Exception):
    """Base class for all errors raised by blax."""


class DimensionError(BlaxError, ValueError):
    """Operands have incompatible or invalid shapes."""


class DomainError(BlaxError, ValueError):
    """An argument lies outside the domain where a formula is valid."""


class SingularityError(BlaxError):
    """A matrix that must be inverted is singular or ill-conditioned."""

    def __init__(self, message, cond=None):
        super().__init__(message)
        self.cond = cond


class NotPSDError(BlaxError):
    """A matrix expected to be positive semidefinite has a negative eigenvalue."""

    def __init__(self, message, min_eigenvalue=None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class StabilityError(BlaxError):
    """The state operator does not have spectral radius below one."""


class ObservabilityError(BlaxError):
    """The output pair is not exactly observable (singular gramian)."""


class ConsistencyError(BlaxError):
    """Two independent computations of the same quantity disagree."""


class PreconditionError(BlaxError):
    """Inputs violate a stated hypothesis of the operation."""


class ConvergenceError(BlaxError):
    """An iterative limit did not converge within the iteration budget."""


class ConstructionError(BlaxError):
    """A factorization required by a construction could not be carried out."""


class CounterexampleError(BlaxError):
    """A conclusion that must hold under verified hypotheses failed."""


class InputError(BlaxError, ValueError):
    """Malformed serialized input; the message names the offending field."""
