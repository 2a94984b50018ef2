"""Exception and warning types shared across the package.

Errors split into two families so callers (and the CLI) can tell bad input
from numerical breakdown: :class:`ValidationError` for inputs that violate a
documented contract, :class:`NumericalError` for failures that happen while
computing on valid inputs.
"""


class YaglomError(Exception):
    """Base class for all package errors."""


class ValidationError(YaglomError, ValueError):
    """Input violates a documented contract."""


class ConfigurationError(ValidationError):
    """Bad solver configuration (size not a power of two, size guards, ...)."""


class ModelError(ValidationError):
    """Offspring model is not a valid (or supported) generating function."""


class DomainError(ValidationError):
    """Evaluation point outside the domain of a generating function."""


class UnsupportedRegimeError(ValidationError):
    """Model lies outside the subcritical regime the solvers handle."""


class NumericalError(YaglomError, ArithmeticError):
    """A computation on valid input broke down."""


class SingularMatrixError(NumericalError):
    """LU factorization met a pivot below the singularity threshold."""


class ConvergenceError(NumericalError):
    """An iteration did not reach its tolerance.

    The last residual reached is kept in :attr:`residual`.
    """

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class NormalizationError(NumericalError):
    """The constant coefficient needed for normalization vanished."""


class DegenerateContourError(NumericalError):
    """A contour node coincides with an image node."""


class AnalysisError(NumericalError):
    """Root bracketing or minimization on a generating function failed."""


class AmbiguousEigenvalueError(NumericalError):
    """The reduced eigenproblem cannot tell the wanted eigenvalue from -m."""


class YaglomWarning(UserWarning):
    """Base class for package warnings."""


class IllConditionedWarning(YaglomWarning):
    """Least-squares system was numerically rank deficient."""


class TruncationWarning(YaglomWarning):
    """A truncated representation may have dropped significant terms."""


class PrecisionWarning(YaglomWarning):
    """A quantity was computed with severe cancellation."""
