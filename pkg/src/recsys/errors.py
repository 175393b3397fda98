"""Exception hierarchy.

Each family maps to one CLI exit code: configuration and usage problems
exit with 1, bad input data with 2, numerical failures with 3.
"""

from __future__ import annotations


class RecsysError(Exception):
    exit_code = 3


class ConfigError(RecsysError):
    """Invalid configuration or inconsistent command usage."""

    exit_code = 1


class DataError(RecsysError):
    """Input data that cannot be used (missing files, malformed rows, unknown ids)."""

    exit_code = 2


class DimensionError(DataError):
    pass


class UnknownIdError(DataError, KeyError):
    def __init__(self, kind: str, ident: str) -> None:
        super().__init__(f"unknown {kind} {ident!r}")
        self.kind = kind
        self.ident = ident

    def __str__(self) -> str:
        return self.args[0]


class UnattainableConfidenceError(DataError):
    def __init__(self, confidence: float, max_coverage: float, n: int) -> None:
        super().__init__(
            f"confidence {confidence} is unattainable with n={n}; "
            f"maximum attainable coverage is {max_coverage!r}"
        )
        self.confidence = confidence
        self.max_coverage = max_coverage
        self.n = n


class NumericError(RecsysError):
    exit_code = 3


class SingularModelError(NumericError):
    """Covariance matrix is singular and cannot be used."""
