"""Exception types raised across the package."""

from __future__ import annotations


class MeanShiftLabError(Exception):
    """Base class for all package errors."""


class InvalidParam(MeanShiftLabError, ValueError):
    pass


class NonFiniteIntegrand(MeanShiftLabError, ArithmeticError):
    pass


class OutOfRange(MeanShiftLabError, ValueError):
    pass


class HardFailure(MeanShiftLabError, RuntimeError):
    """A root search or iteration exceeded its hard iteration cap."""


class DegenerateWeights(MeanShiftLabError, ArithmeticError):
    """A weighted-mean denominator underflowed to zero or became non-finite."""


class InversionFailure(MeanShiftLabError, RuntimeError):
    """A tabulated map that must be strictly increasing is not."""


class CostGuard(MeanShiftLabError, ValueError):
    """Requested kernel horizon exceeds the supported recursion depth."""


class DataParseError(MeanShiftLabError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
