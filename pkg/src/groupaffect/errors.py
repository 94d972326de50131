"""Shared exception base classes.

Concrete errors live next to the code that raises them; these bases exist so
the CLI can map validation problems to exit code 2 and everything else to 1.
"""


class GroupAffectError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(GroupAffectError):
    """Bad input data or configuration (CLI exit code 2)."""
