"""Shared exception hierarchy.

Everything raised on bad user data derives from :class:`CaplensError` so the
CLI can map it to exit code 1; anything else is treated as an internal error
(exit code 2).
"""


class CaplensError(Exception):
    """Base class for all errors caused by invalid inputs or configuration."""


class UnsupportedLanguageError(CaplensError):
    """An annotation was requested for a language the rule set does not cover."""
