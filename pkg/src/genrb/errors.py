"""Exception types raised across the package."""


class GenRBError(Exception):
    """Base class for all package errors."""


class InvalidInputError(GenRBError, ValueError):
    pass


class OutOfRangeError(InvalidInputError):
    """A value lies outside the range of an activation function.

    The offending value is kept on ``value`` so callers can decide to clamp.
    """

    def __init__(self, message, value):
        super().__init__(message)
        self.value = value


class DimensionError(InvalidInputError):
    pass


class EmptyBasisError(GenRBError):
    pass


class GenerationError(GenRBError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class OutOfDomainError(InvalidInputError):
    pass


class AssemblyError(GenRBError):
    pass


class SolverError(GenRBError):
    def __init__(self, message, mu=None):
        super().__init__(message)
        self.mu = mu


class OnlineSingularityError(SolverError):
    pass


class BasesUnavailableError(GenRBError):
    pass


class ArtifactError(GenRBError):
    """Raised for unreadable, truncated or corrupt ROM artifacts."""


class GreedyError(GenRBError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
