"""
Exception hierarchy shared by the numerical core and the CLI.
"""

from enum import Enum
from typing import List, Optional


class ErrorType(Enum):
    """Types of errors that can occur"""
    PARSE_ERROR = "parse_error"
    INVARIANT_VIOLATION = "invariant_violation"
    SOLVER_ERROR = "solver_error"
    UNKNOWN_ERROR = "unknown_error"


EXIT_CODES = {
    ErrorType.PARSE_ERROR: 2,
    ErrorType.INVARIANT_VIOLATION: 3,
    ErrorType.SOLVER_ERROR: 4,
    ErrorType.UNKNOWN_ERROR: 1,
}


class KerrsightError(Exception):
    """Base class for all errors raised by kerrsight"""
    error_type = ErrorType.UNKNOWN_ERROR

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.error_type]


class ConfigParseError(KerrsightError):
    """Configuration file could not be read or has the wrong structure"""
    error_type = ErrorType.PARSE_ERROR


class InvalidParameterError(KerrsightError, ValueError):
    error_type = ErrorType.INVARIANT_VIOLATION


class InvariantViolationError(KerrsightError, ValueError):
    error_type = ErrorType.INVARIANT_VIOLATION


class ShapeOutOfBoundsError(KerrsightError, ValueError):
    error_type = ErrorType.INVARIANT_VIOLATION


class DimensionMismatchError(KerrsightError, ValueError):
    error_type = ErrorType.INVARIANT_VIOLATION


class AliasingError(KerrsightError, ValueError):
    """Too few quadrature nodes for the requested number of Fourier modes"""
    error_type = ErrorType.INVARIANT_VIOLATION


class DomainError(KerrsightError, ValueError):
    """Special function evaluated outside its domain"""
    error_type = ErrorType.INVARIANT_VIOLATION


class NoConvergenceError(KerrsightError):
    """Krylov iteration exhausted its budget"""
    error_type = ErrorType.SOLVER_ERROR

    def __init__(self, message: str, residual: Optional[float] = None):
        super().__init__(message)
        self.residual = residual


class NoContractionError(KerrsightError):
    """Fixed point iteration stopped contracting"""
    error_type = ErrorType.SOLVER_ERROR

    def __init__(self, message: str, increment_history: Optional[List[float]] = None):
        super().__init__(message)
        self.increment_history = list(increment_history or [])


class DegenerateDenominatorError(KerrsightError):
    """|<g, phi_z>| fell below the configured floor"""
    error_type = ErrorType.SOLVER_ERROR


class AllDegenerateError(KerrsightError):
    """Every global-search candidate hit the denominator floor"""
    error_type = ErrorType.SOLVER_ERROR
