"""Exception types shared across the toolkit.

The CLI maps these onto exit codes: usage errors exit 1, DataError
exits 2, NumericalError exits 3.
"""


class DataError(Exception):
    """Raised for malformed input data, files, or artifacts."""


class ParseError(DataError):
    """Raised when a raw record file violates the expected format."""


class NumericalError(Exception):
    """Raised when an optimization or training run fails numerically."""


class IterationLimitError(NumericalError):
    """Raised when an iterative solver hits its cap; carries the best iterate."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best
