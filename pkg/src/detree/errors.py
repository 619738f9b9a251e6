"""Exception hierarchy shared by all detree modules."""


class DetError(Exception):
    """Base class for every error raised by detree."""


class DomainError(DetError, ValueError):
    """Argument outside the domain of a numerical function."""


class DegenerateDimension(DetError, ValueError):
    """A coordinate has zero spread (min == max or zero standard deviation)."""

    def __init__(self, dim, message=None):
        self.dim = dim
        super().__init__(message or f"dimension {dim} is degenerate (zero spread)")


class EmptySubset(DetError, ValueError):
    """An operation that needs samples received none."""


class UnsplittableInterval(DetError):
    """No threshold strictly inside the interval separates the samples."""


class SingularCovariance(DetError, ValueError):
    """Sample covariance could not be factorized."""


class UnknownCase(DetError, KeyError):
    """Name does not match any registered reference case."""

    def __str__(self):
        return str(self.args[0]) if self.args else "unknown case"


class DivisionByZeroDensity(DetError, ZeroDivisionError):
    """Monte Carlo ISE received a sample at which the true density vanishes."""


class FormatError(DetError, ValueError):
    """Malformed serialized tree."""

    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)


class DataFormatError(DetError, ValueError):
    """Malformed sample CSV."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
