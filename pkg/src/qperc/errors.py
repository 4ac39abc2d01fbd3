"""Exception hierarchy shared by the simulator modules."""


class QpercError(Exception):
    """Base class for all simulator errors."""


class DomainError(QpercError, ValueError):
    """An argument lies outside the domain an operation accepts."""


class ResourceError(QpercError):
    """A request exceeds a desk-scale guard (e.g. dense diagonalization size)."""


class PropagationError(QpercError):
    """Time evolution failed for a specific trial."""

    def __init__(self, message, *, P=None, trial_index=None, seed=None):
        super().__init__(message)
        self.P = P
        self.trial_index = trial_index
        self.seed = seed


class ValidationError(QpercError, ValueError):
    """A configuration document does not match the expected schema."""

    def __init__(self, message, keys=()):
        super().__init__(message)
        self.keys = list(keys)


class DependencyError(QpercError):
    """A required input file is missing."""
