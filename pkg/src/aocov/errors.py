"""Exception hierarchy shared by all modules.

Each family maps to one CLI exit code (see :mod:`aocov.cli`).
"""


class AOCovError(Exception):
    """Base class for every error raised by the package."""


class DataError(AOCovError, ValueError):
    """Malformed or degenerate input data."""


class ParseError(DataError):
    pass


class DimensionError(DataError):
    pass


class DuplicateDateError(DataError):
    pass


class DegenerateColumnError(DataError):
    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


class EmptySelectionError(DataError):
    """Every asset was removed by the selection filters."""


class CalibrationFormatError(DataError):
    pass


class VersionError(CalibrationFormatError):
    pass


class ChecksumError(CalibrationFormatError):
    pass


class NumericError(AOCovError, ArithmeticError):
    """Numerical failure: non-convergence, singular system, negative spectrum."""


class InfeasibleWindowError(AOCovError, ValueError):
    """A requested window does not fit in the available range."""


class InsufficientAssetsError(InfeasibleWindowError):
    pass


class NotPositiveDefiniteError(AOCovError):
    """Skip signal: a quantity is undefined because a matrix is not strictly PD.

    Distinct from :class:`NumericError`; callers are expected to count and skip.
    """
