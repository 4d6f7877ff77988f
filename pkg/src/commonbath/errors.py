"""Exception hierarchy shared by all modules.

The CLI maps :class:`DomainError` subclasses to exit code 2 and
:class:`UsageError` to exit code 1.
"""


class CommonBathError(Exception):
    """Base class for every error raised by this package."""


class UsageError(CommonBathError, ValueError):
    """An operation was called on an input of the wrong shape or kind."""


class DomainError(CommonBathError):
    """The request is well formed but physically or numerically impossible."""


class ParameterError(DomainError, ValueError):
    """A physical parameter is outside its allowed range."""


class UnsupportedConfigurationError(DomainError):
    """The configuration is valid physics but outside the supported model."""


class StructureError(DomainError):
    """A quadratic system does not have the structure an operation expects."""


class NoEquilibriumError(DomainError):
    """The system has no thermal equilibrium state (unbounded or zero mode)."""

    def __init__(self, message, direction=None):
        super().__init__(message)
        self.direction = direction
