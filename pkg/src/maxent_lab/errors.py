"""Exception types shared across the lab."""


class LabError(Exception):
    """Base class for every error raised by maxent_lab."""


class ValidationError(LabError, ValueError):
    pass


class NotNormalized(ValidationError):
    pass


class NegativeEntry(ValidationError):
    pass


class TooManyFeatures(ValidationError):
    pass


class EmptySample(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class RangeError(ValidationError):
    pass


class UnknownKey(ValidationError):
    pass


class ParseError(ValidationError):
    def __init__(self, message, line=None, column=None):
        super().__init__(message)
        self.line = line
        self.column = column


class RejectionBudgetExceeded(LabError):
    pass


class InvariantViolation(LabError, AssertionError):
    """A provable inequality failed on a concrete instance."""


class NonConvergence(LabError):
    """Iteration budget ran out before the gradient fell below tolerance.

    ``result`` carries the best iterate so callers can still inspect it.
    """

    def __init__(self, message, residual, result=None):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual
        self.result = result
