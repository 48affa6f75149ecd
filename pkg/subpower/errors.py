"""
Exception hierarchy for the subpower package.

Every exception derives from SubpowerError and from the builtin that callers
would otherwise catch (ValueError for bad input, RuntimeError for limits hit
while computing), so `except ValueError` keeps working for callers that do
not know the package types.
"""
from typing import Optional

__all__ = ['SubpowerError', 'CatalogError', 'IdentityError',
           'PreconditionError', 'CapExceededError', 'ProvenanceError',
           'MethodUnavailableError']


class SubpowerError(Exception):
    pass


class CatalogError(SubpowerError, ValueError):
    """Malformed algebra, term, instance or representation data."""


class IdentityError(SubpowerError, ValueError):
    """A configured or derived term fails one of its defining identities."""


class PreconditionError(SubpowerError, ValueError):
    """An operation was called outside its input contract."""


class CapExceededError(SubpowerError, RuntimeError):
    """
    A configured work limit was reached before the computation finished.

    Attributes
    ----------
    cap_name : str
        Name of the settings global that was exceeded
    limit : int
        Its value at the time
    """

    def __init__(self, message : str, cap_name : str, limit : Optional[int]=None) -> None:
        super().__init__(message)
        self.cap_name = cap_name
        self.limit = limit


class ProvenanceError(SubpowerError, RuntimeError):
    """A tuple has no recorded derivation from the generators."""


class MethodUnavailableError(SubpowerError, RuntimeError):
    """The requested solving method does not apply to the catalog."""
