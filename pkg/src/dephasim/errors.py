"""Exception hierarchy shared by every dephasim module."""


class DephasimError(Exception):
    """Base class for all package errors."""


class ValidationError(DephasimError, ValueError):
    """A parameter failed validation. ``field`` names the offending key."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class DomainError(DephasimError, ValueError):
    """An argument lies outside the domain of an operation."""


class NumericalError(DephasimError, ArithmeticError):
    """Base class for failures of a numerical procedure to meet tolerance."""


class ConvergenceError(NumericalError):
    def __init__(self, message, partial=None, last_term=None):
        super().__init__(message)
        self.partial = partial
        self.last_term = last_term


class AccuracyError(NumericalError):
    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class TruncationError(NumericalError):
    """Fock truncation is too small for the requested state or operator."""

    def __init__(self, message, suggested_dim=None):
        super().__init__(message)
        self.suggested_dim = suggested_dim


class StepSizeError(NumericalError):
    pass


class ToleranceFailure(NumericalError):
    """Oracle and closed form disagree beyond the allowed tolerance."""
