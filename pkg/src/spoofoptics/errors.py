"""Exception hierarchy shared across the package."""


class SpoofOpticsError(Exception):
    """Base class for all package errors."""


class ValidationError(SpoofOpticsError, ValueError):
    """Input violates a documented precondition."""


class RenderError(ValidationError):
    """A lighting sample produced too much negative irradiance to be usable."""


class FitError(SpoofOpticsError):
    """A least-squares design was rank deficient.

    ``null_space`` holds the unit vectors (rows) spanning the deficient
    coefficient subspace, when known.
    """

    def __init__(self, message, null_space=None):
        super().__init__(message)
        self.null_space = null_space


class TrainingError(SpoofOpticsError):
    """Optimisation diverged; ``step`` is the iteration where it happened."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ParseError(SpoofOpticsError):
    """Malformed file. ``offset`` is a byte offset or ``line`` a line number."""

    def __init__(self, message, offset=None, line=None):
        where = ""
        if offset is not None:
            where = f" (byte {offset})"
        elif line is not None:
            where = f" (line {line})"
        super().__init__(message + where)
        self.offset = offset
        self.line = line
