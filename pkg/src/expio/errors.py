"""Exception hierarchy shared across the package.

Exit codes are attached to the exception classes so the CLI can translate
failures uniformly: 0 success, 1 data errors, 2 usage errors, 3 backend
errors, 4 comparison-precondition errors.
"""

from __future__ import annotations


class ExpioError(Exception):
    exit_code = 1


class DataError(ExpioError):
    """Malformed or invariant-violating input data."""

    exit_code = 1


class UsageError(ExpioError):
    """Bad arguments: unknown schema, missing file, out-of-range option."""

    exit_code = 2


class BackendError(ExpioError):
    """Tagging-backend failure, carrying a machine-readable code."""

    exit_code = 3

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


class BackendUnreachableError(BackendError):
    def __init__(self, message: str):
        super().__init__("unreachable", message)


class CompareMismatchError(ExpioError):
    """Two runs cannot be compared (validation-set fingerprints differ)."""

    exit_code = 4


class ModelFormatError(DataError):
    """Base for model-file container errors."""


class BadMagicError(ModelFormatError):
    pass


class VersionMismatchError(ModelFormatError):
    pass


class TruncatedModelError(ModelFormatError):
    pass
