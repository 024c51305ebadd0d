"""Exception types raised across the package.

The CLI maps these onto exit codes: configuration problems -> 2,
data problems -> 3, numerical failures -> 4.
"""

import numpy as np


class ConfigError(ValueError):
    """Invalid configuration or hyperparameter values."""


class InvalidParameterError(ConfigError):
    """A distribution parameter is outside its support."""


class InfeasibleTargetError(ConfigError):
    """Moment-matching targets admit no real solution."""


class DataError(ValueError):
    """Malformed or inconsistent input data."""


class SchemaError(DataError):
    pass


class NumericError(ArithmeticError):
    """Base class for numerical failures during sampling."""


class NotPositiveDefiniteError(NumericError, np.linalg.LinAlgError):
    def __init__(self, message: str, pivot: int | None = None):
        super().__init__(message if pivot is None else f"{message} (pivot {pivot})")
        self.pivot = pivot


class SingularDesignError(NumericError):
    def __init__(self, message: str, columns=()):
        super().__init__(f"{message}: columns {list(columns)}")
        self.columns = tuple(columns)


class NoSamplesError(ValueError):
    """A summary was requested from a chain with no kept draws."""


class TraceTooShortError(ValueError):
    pass


class ChainError(NumericError):
    """A step failed inside a chain; carries the iteration index."""

    def __init__(self, iteration: int, step: str, cause: Exception):
        super().__init__(f"iteration {iteration}, step {step}: {cause}")
        self.iteration = iteration
        self.step = step
        self.cause = cause
