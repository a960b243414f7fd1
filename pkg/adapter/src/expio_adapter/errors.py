"""Structured request failures, surfaced as {"ok": false, ...} replies."""


class WireError(Exception):
    """Request-level failure with a machine-readable code."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code
