"""Exception types shared across the package.

The CLI maps these onto process exit codes: config errors exit 2, data
errors exit 3, runtime degeneracies exit 4.
"""

from __future__ import annotations


class ConfigError(ValueError):
    """Invalid or unknown configuration."""


class DataError(ValueError):
    """Malformed input data: bad file, dimension mismatch, missing field."""


class MeasurementDegenerateError(RuntimeError):
    """All likelihood mass vanished during filtering (normalizer hit zero)."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step
