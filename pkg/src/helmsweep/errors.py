"""Shared exception types."""


class FactorizationError(RuntimeError):
    """A factorization hit a pivot below tolerance.

    ``where`` identifies the failing row / layer / group, depending on the
    factorization kind.
    """

    def __init__(self, message, where=None):
        super().__init__(message)
        self.where = where


class MemoryGuardError(RuntimeError):
    """A benchmark case was refused because its memory estimate is too large."""

    def __init__(self, message, estimated_bytes):
        super().__init__(message)
        self.estimated_bytes = estimated_bytes
