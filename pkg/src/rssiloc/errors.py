"""Exception hierarchy shared by all rssiloc modules."""


class RssilocError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(RssilocError):
    """Input shapes disagree with what a model or dataset expects."""


class DegenerateData(RssilocError):
    """Dataset cannot support the requested operation (too few rows,
    zero-range channel, under-populated reference point)."""


class FormatError(RssilocError):
    """Model file has a bad magic string or an unsupported version."""


class CorruptModel(RssilocError):
    """Model file is truncated, fails its checksum, or is internally
    inconsistent."""


class OutOfRange(RssilocError):
    """A radio link exceeds the channel's maximum range (lost beacon)."""


class SolveFailure(RssilocError):
    """Damped normal equations stayed non-positive-definite even after
    exhausting the damping escalation."""


class ParseError(RssilocError):
    """Malformed text input. Carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
