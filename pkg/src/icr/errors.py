"""Exception types raised across the package."""


class ICRError(Exception):
    """Base class for all package errors."""


class ModelError(ICRError, ValueError):
    """A variable declaration, distribution or conditional is malformed."""


class NotSubset(ICRError, ValueError):
    pass


class ScopeMismatch(ICRError, ValueError):
    pass


class SupportViolation(ICRError, ValueError):
    pass


class SingularCovariance(ICRError, ValueError):
    pass


class NotPositiveDefinite(SingularCovariance):
    pass


class ZeroMarginal(ICRError, ValueError):
    pass


class NotAPermutation(ICRError, ValueError):
    pass


class TooManyConditionals(ICRError, ValueError):
    pass


class NotPermissibleStep(ICRError, ValueError):
    pass


class NotPermissible(ICRError, ValueError):
    """The requested updating cycle violates the permissibility condition."""

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class NoConvergence(ICRError, RuntimeError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class StateSpaceTooLarge(ICRError, ValueError):
    pass


class NonUniqueFixedPoint(ICRError, RuntimeError):
    pass


class NotAllFull(ICRError, ValueError):
    pass


class InconsistentMargins(ICRError, ValueError):
    pass
