"""Application package: configuration, error types, services and the CLI."""

__all__ = [
    "config",
    "errors",
    "main",
]
