"""Shared exception types."""


class DataError(ValueError):
    """Malformed or inconsistent input data (maps to CLI exit code 2)."""


class StoreError(ValueError):
    """Corrupt, truncated, or incompatible model container."""
