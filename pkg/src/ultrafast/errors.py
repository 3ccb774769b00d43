"""Exception hierarchy.

Every error carries the process exit status the command-line front end
should use when it escapes a subcommand.
"""

from __future__ import annotations


class UltrafastError(Exception):
    exit_status = 3


class ConfigurationError(UltrafastError, ValueError):
    """Invalid user-supplied configuration (exit status 2)."""

    exit_status = 2


class ParameterError(ConfigurationError):
    """A numeric parameter violates a precondition of a formula."""


class UnsupportedWeightError(ConfigurationError):
    pass


class DimensionError(ConfigurationError):
    """Array shape does not match the grid."""


class TruncationTooSmallError(ConfigurationError):
    pass


class NumericalFailure(UltrafastError, ArithmeticError):
    """A computation did not converge or produced non-finite values (exit 3)."""

    def __init__(self, message: str, *, residual: float | None = None, record=None):
        super().__init__(message)
        self.residual = residual
        self.record = record


class PositivityError(NumericalFailure):
    """A density dropped to (or below) the positivity floor."""


class FitError(NumericalFailure):
    pass


class PropertyViolation(UltrafastError):
    """An inequality check failed beyond tolerance (exit status 1)."""

    exit_status = 1
