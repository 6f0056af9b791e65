"""
Exception Hierarchy

All errors raised by the library derive from MultiDreError. The CLI maps
InvalidInputError to exit code 1 and NumericalAbortError to exit code 2.
"""

from pathlib import Path
from typing import Optional, Union


class MultiDreError(Exception):
    """Base class for all library errors."""
    pass


class InvalidInputError(MultiDreError):
    """Raised when an argument violates a documented precondition."""
    pass


class InvalidDatasetError(InvalidInputError):
    """Raised when a grouped dataset is empty, ragged or inconsistent."""
    pass


class DimensionMismatchError(InvalidInputError):
    """Raised when array shapes disagree with the declared k or d."""
    pass


class ZeroProbabilityError(InvalidInputError):
    """Raised when a class probability is zero where a ratio is required."""
    pass


class DataFileError(InvalidInputError):
    """Raised when a data, matrix or checkpoint file cannot be read."""

    def __init__(self, path: Union[str, Path], reason: str):
        self.path = str(path)
        self.reason = reason
        super().__init__(f"{self.path}: {reason}")

    def __reduce__(self):
        return type(self), (self.path, self.reason)


class NumericalAbortError(MultiDreError, ArithmeticError):
    """Raised when training produces a non-finite or divergent loss."""

    def __init__(self, step: int, loss: float, reason: Optional[str] = None):
        self.step = step
        self.loss = loss
        self.reason = reason
        message = f"training aborted at step {step}: loss={loss!r}"
        if reason:
            message = f"{message} ({reason})"
        super().__init__(message)

    def __reduce__(self):
        # worker processes send exceptions back pickled
        return type(self), (self.step, self.loss, self.reason)


class UsageError(InvalidInputError):
    """Raised for unknown flags or malformed command lines."""
    pass
