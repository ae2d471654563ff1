"""Exception types shared across the package."""

from __future__ import annotations


class ConfigError(ValueError):
    """A parameter or configuration value is outside its documented range."""


class TruncationError(RuntimeError):
    """A walk hit its step budget before the stopping rule fired.

    ``partial`` carries the statistics accumulated up to the cutoff.
    """

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


class GridError(ValueError):
    """A requested time grid is incompatible with the data it indexes."""
