"""
FBTumor - Exceptions

One tree for every failure the library reports. Input problems derive
from ValidationError, assumption failures carry their report, and
numerical failures derive from SolverError; the CLI maps the three to
exit codes 2, 4 and 3.

Version: 1.0.0
"""

from __future__ import annotations

from typing import Any, Dict, Optional


class FBTumorError(Exception):
    """
    Root of the fbtumor exception tree.

    Attributes:
        message: One-line description, printed by the CLI
        details: Structured context (operation, bracket, field, ...)
        retryable: True when a longer horizon or looser tolerance may succeed
    """

    def __init__(
        self,
        message: str,
        details: Optional[Dict[str, Any]] = None,
        retryable: bool = False
    ) -> None:
        super().__init__(message)
        self.message: str = message
        self.details: Dict[str, Any] = details or {}
        self.retryable: bool = retryable

    def to_dict(self) -> Dict[str, Any]:
        """Serializable form, logged by the CLI at DEBUG."""
        return {
            "error_type": self.__class__.__name__,
            "message": self.message,
            "details": self.details,
            "retryable": self.retryable,
        }


# =============================================================================
# INPUT VALIDATION EXCEPTIONS
# =============================================================================

class ValidationError(FBTumorError):
    """
    Malformed parameters, options or configuration.

    Attributes:
        field: Offending field or option
        value: Offending value as text, cut to 50 characters
        reason: Short machine-readable cause ("missing", "malformed", ...)
    """

    def __init__(
        self,
        message: str,
        field: str,
        value: Any = None,
        reason: str = ""
    ) -> None:
        safe_value = str(value)[:50] if value is not None else None

        super().__init__(
            message=message,
            details={
                "field": field,
                "value": safe_value,
                "reason": reason,
            },
            retryable=False
        )
        self.field: str = field
        self.value: Any = safe_value
        self.reason: str = reason


class DomainError(ValidationError):
    """Raised when an argument lies outside an operation's preconditions."""

    def __init__(self, field: str, value: Any, reason: str) -> None:
        super().__init__(
            message=f"{field}={value!s:.20} outside domain: {reason}",
            field=field,
            value=value,
            reason=reason
        )


class AssumptionViolationError(FBTumorError):
    """
    Raised when model parameters fail the standing assumptions (A1)-(A3).

    Attributes:
        report: The ValidationReport that failed
    """

    def __init__(self, report: Any) -> None:
        failed = [check.name for check in report.failures]
        super().__init__(
            message=f"Model assumptions violated: {', '.join(failed)}",
            details={"failed": failed},
            retryable=False
        )
        self.report: Any = report


# =============================================================================
# SOLVER EXCEPTIONS
# =============================================================================

class SolverError(FBTumorError):
    """Base class for numerical solver failures."""


class ConvergenceError(SolverError):
    """
    Raised when an iterative solver exhausts its budget.

    Attributes:
        operation: Name of the failing operation
        iterations: Iterations or steps performed
        partial: Partial result, if any (e.g. a truncated Trajectory)
    """

    def __init__(
        self,
        operation: str,
        reason: str = "",
        iterations: int = 0,
        partial: Any = None
    ) -> None:
        super().__init__(
            message=f"{operation} did not converge after {iterations} iterations: {reason}",
            details={
                "operation": operation,
                "iterations": iterations,
                "reason": reason,
            },
            retryable=True
        )
        self.operation: str = operation
        self.iterations: int = iterations
        self.partial: Any = partial


class BracketError(ConvergenceError):
    """Raised when a doubling search fails to find a sign change."""

    def __init__(self, operation: str, lower: float, upper: float, expansions: int) -> None:
        super().__init__(
            operation=operation,
            reason=f"no sign change found in [{lower:.6g}, {upper:.6g}]",
            iterations=expansions
        )
        self.details.update({"lower": lower, "upper": upper})


class InternalConsistencyError(SolverError):
    """
    Raised when a residual that must bracket a root (or be monotone) does not.

    Indicates a rate function silently breaking the model assumptions.
    """

    def __init__(self, operation: str, reason: str) -> None:
        super().__init__(
            message=f"{operation}: {reason}",
            details={"operation": operation, "reason": reason},
            retryable=False
        )
        self.operation: str = operation
