"""Exception types shared across the package."""


class LiqflowError(Exception):
    """Base class for all package errors."""


class BasisMismatchError(LiqflowError, ValueError):
    pass


class DegreeCollapseError(LiqflowError, ValueError):
    """Leading coefficient is numerically zero, so the degree is ill defined."""


class DegenerateMatrixError(LiqflowError, ArithmeticError):
    """A matrix that must be positive definite is not (within tolerance)."""

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class KronrodInfeasible(LiqflowError, ArithmeticError):
    """The Kronrod extension has complex nodes or non-positive weights."""


class WarmUpError(LiqflowError, RuntimeError):
    """Indicators requested before the moment state is well conditioned."""


class TickOrderError(LiqflowError, ValueError):
    pass


class DataError(LiqflowError, ValueError):
    """Malformed input data; carries the offending line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
