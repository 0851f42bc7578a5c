"""Exception hierarchy shared by every module."""


class AnisotropicError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(AnisotropicError, ValueError):
    """A point or direction lies outside the chart or the conic domain."""


class DegeneracyError(AnisotropicError, ArithmeticError):
    """The fundamental tensor is (numerically) degenerate at a sample."""


class EvaluationError(AnisotropicError, FloatingPointError):
    """A field evaluated to a non-finite value."""


class IntegrationError(AnisotropicError, RuntimeError):
    """An ODE integration step failed."""


class PreconditionError(AnisotropicError, ValueError):
    """A numerically verified precondition does not hold."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ConfigError(AnisotropicError, ValueError):
    """A scenario configuration failed to parse or validate."""
