"""Exception hierarchy.

The CLI maps :class:`ConfigError` to exit code 2 and :class:`DataError`
to exit code 3.
"""


class ClswpError(Exception):
    """Base class for all package errors."""


class DomainError(ClswpError, ValueError):
    """An argument lies outside the mathematical domain (e.g. scale <= 0)."""


class UsageError(ClswpError, ValueError):
    """An operation was called with incompatible inputs (roles, grids, sizes)."""


class ConfigError(UsageError):
    """Invalid or inconsistent configuration."""


class DataError(ClswpError, ValueError):
    """Malformed input data (CSV content, non-monotone times, NaN)."""


class QuadratureError(ClswpError, ArithmeticError):
    """A quadrature did not reach its tolerance within the allowed budget.

    The best available estimate is kept on ``partial``.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
