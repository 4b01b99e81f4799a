"""Adapter-level error type."""


class ExtractError(Exception):
    """Unrecoverable extraction failure (bad job config, no usable input)."""

    exit_code = 2
