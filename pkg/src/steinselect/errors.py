"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: validation problems exit 2, numerical
failures exit 3, iteration limits exit 4.
"""

from __future__ import annotations


class SteinSelectError(Exception):
    """Base class for all package errors."""


class ValidationError(SteinSelectError):
    """Bad inputs, configs, or dimensions detected before any numerics run."""


class SchemaError(ValidationError):
    """Structural problem with a tabular input (missing/duplicate columns)."""


class ParseError(ValidationError):
    """A cell failed to parse as a finite real; carries its location."""

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        super().__init__(message)
        self.row = row
        self.column = column


class ConfigError(ValidationError):
    """A configuration object violates its own invariants."""


class NumericalError(SteinSelectError):
    """A numerical operation failed on otherwise valid inputs."""


class RankError(NumericalError):
    """Covariance estimate is singular or near-singular."""


class DegenerateDataError(NumericalError):
    """Input data carry no usable signal (e.g. all-zero design)."""


class TrainingDivergenceError(NumericalError):
    """Refit training produced a non-finite or increasing loss."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class IterationLimitError(SteinSelectError):
    """Screening hit its round cap; carries the partial trace."""

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = trace
