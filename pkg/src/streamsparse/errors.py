"""Exception hierarchy shared across the package."""


class StreamSparseError(Exception):
    """Base class for every error raised by streamsparse."""


class DomainError(StreamSparseError, ValueError):
    """An argument lies outside the domain of the operation."""


class ShapeError(StreamSparseError, ValueError):
    """Array dimensions are inconsistent."""


class DivergenceError(StreamSparseError, ArithmeticError):
    """An iterate became non-finite or exceeded the divergence guard."""

    def __init__(self, message, iteration=None, batch_index=None):
        super().__init__(message)
        self.iteration = iteration
        self.batch_index = batch_index


class ConvergenceError(StreamSparseError, ArithmeticError):
    """An iterative solver ran out of iterations; ``last_iterate`` holds its final point."""

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class SingularHessianError(StreamSparseError, ArithmeticError):
    """A Hessian required to be invertible is numerically singular."""


class CheckpointError(StreamSparseError):
    """Base class for malformed checkpoint streams."""


class BadMagicError(CheckpointError):
    pass


class UnsupportedVersionError(CheckpointError):
    pass


class TruncatedStreamError(CheckpointError):
    pass


class DimensionOverflowError(CheckpointError):
    pass


class SaturationWarning(RuntimeWarning):
    """A value overflowed and was saturated (e.g. a Poisson loss returned +inf)."""


class ConfigError(DomainError):
    """An experiment configuration is malformed; the message names the key."""


class DataFormatError(StreamSparseError, ValueError):
    """An input data file holds a value that cannot be parsed."""
