"""Exception hierarchy shared by the library and the CLI."""

from __future__ import annotations


class ModelError(Exception):
    """Base class for every error raised by cvqkd_arf."""


class DomainError(ModelError, ValueError):
    """An argument lies outside the mathematical domain of a function."""


class OverflowDomainError(DomainError, OverflowError):
    """The result would not be representable as a finite double."""


class DegenerateConfigError(ModelError, ValueError):
    """A configuration makes a formula singular (e.g. zero noise variance)."""


class ValidationError(ModelError, ValueError):
    """A parameter set violates a documented invariant."""


class ConfigParseError(ModelError):
    """A configuration document could not be parsed."""

    def __init__(self, message: str, line=None):
        super().__init__(message)
        self.line = line


class ConvergenceError(ModelError, ArithmeticError):
    """Adaptive quadrature exhausted its subdivision budget."""


class SampleSizeError(ModelError, ValueError):
    """A Monte Carlo routine was asked for too few samples."""
