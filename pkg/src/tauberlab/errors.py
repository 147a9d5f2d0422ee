"""Exception types shared across the package."""


class TauberError(Exception):
    """Base class for all errors raised by tauberlab."""


class DomainError(TauberError, ValueError):
    """A parameter lies outside the domain of the operation."""


class InsufficientDataError(TauberError, ValueError):
    """The sampled data does not cover the requested horizon or index."""


class ConcatenationError(TauberError, ValueError):
    """Endpoint of the first trajectory does not match the start of the second."""


class AlignmentError(TauberError, ValueError):
    """A time is not on the sampling grid, or two grids differ."""


class ContractError(TauberError, ValueError):
    """A caller-side precondition of an operation was violated."""


class FeasibilityError(TauberError):
    """A simulated path left the admissible state space."""

    def __init__(self, message, time):
        super().__init__(message)
        self.time = time


class CapacityError(TauberError):
    """State expansion exceeded the configured node cap."""

    def __init__(self, message, frontier_size):
        super().__init__(message)
        self.frontier_size = frontier_size
