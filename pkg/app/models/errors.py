"""
Error handling and exception classes for the periodic drift estimator.

This module provides custom exceptions and machine-readable error details.
Each exception carries the process exit code the CLI reports for it.
"""

from typing import List, Optional

from pydantic import BaseModel


class ErrorKind:
    """Error kinds reported in error documents."""
    INVALID_ARGUMENT = "InvalidArgument"
    INVALID_DATA = "InvalidData"
    SCHEMA_MISMATCH = "SchemaMismatch"
    SIMULATION_DIVERGED = "SimulationDiverged"
    NUMERICAL = "Numerical"


class ExitCode:
    """Process exit codes."""
    OK = 0
    VALIDATION = 2
    NUMERICAL = 3


class ErrorDetail(BaseModel):
    """Individual error detail model."""
    kind: str
    message: str
    parameters: Optional[List[str]] = None
    reason: Optional[str] = None
    index: Optional[int] = None
    value: Optional[float] = None


class ErrorsResponse(BaseModel):
    """Error document written to stderr by the CLI."""
    errors: List[ErrorDetail]


class DriftEstimationError(Exception):
    """Base exception for the periodic drift estimator."""

    exit_code: int = ExitCode.VALIDATION

    def __init__(
        self,
        message: str,
        kind: str,
        parameters: Optional[List[str]] = None,
        reason: Optional[str] = None,
        index: Optional[int] = None,
        value: Optional[float] = None
    ):
        """Initialize estimator exception."""
        super().__init__(message)
        self.message = message
        self.kind = kind
        self.parameters = parameters or []
        self.reason = reason
        self.index = index
        self.value = value

    def to_error_detail(self) -> ErrorDetail:
        """Convert exception to error detail."""
        return ErrorDetail(
            kind=self.kind,
            message=self.message,
            parameters=self.parameters if self.parameters else None,
            reason=self.reason,
            index=self.index,
            value=self.value
        )

    def to_response(self) -> ErrorsResponse:
        """Wrap the detail into an error document."""
        return ErrorsResponse(errors=[self.to_error_detail()])


class InvalidArgumentError(DriftEstimationError):
    """An operation was called outside its preconditions."""

    def __init__(
        self,
        parameters: List[str],
        reason: str,
        message: Optional[str] = None
    ):
        if not message:
            param_list = "', '".join(parameters)
            message = f"Invalid value for parameter{'s' if len(parameters) > 1 else ''} '{param_list}': {reason}"

        super().__init__(
            message=message,
            kind=ErrorKind.INVALID_ARGUMENT,
            parameters=parameters,
            reason=reason
        )


class DataValidationError(DriftEstimationError):
    """An input data file cannot be used (empty, NaN, non-uniform spacing)."""

    def __init__(self, source: str, reason: str, index: Optional[int] = None):
        message = f"Invalid data in {source}: {reason}"
        super().__init__(
            message=message,
            kind=ErrorKind.INVALID_DATA,
            reason=reason,
            index=index
        )


class SchemaMismatchError(DriftEstimationError):
    """Inputs to a merge do not share a column layout."""

    def __init__(self, source: str, expected: List[str], found: List[str]):
        reason = f"expected columns {expected}, found {found}"
        super().__init__(
            message=f"Schema mismatch in {source}: {reason}",
            kind=ErrorKind.SCHEMA_MISMATCH,
            reason=reason
        )


class SimulationDivergedError(DriftEstimationError):
    """The Euler scheme produced a non-finite value."""

    exit_code = ExitCode.NUMERICAL

    def __init__(self, index: int, value: float):
        super().__init__(
            message=f"Simulation diverged at step {index} (x={value!r})",
            kind=ErrorKind.SIMULATION_DIVERGED,
            index=index,
            value=value
        )


class NonFiniteDriftError(DriftEstimationError):
    """A drift evaluation returned a non-finite value."""

    exit_code = ExitCode.NUMERICAL

    def __init__(self, x: float):
        self.x = x
        super().__init__(
            message=f"Drift evaluation is not finite at x={x!r}",
            kind=ErrorKind.NUMERICAL,
            value=x
        )


class NumericalError(DriftEstimationError):
    """A factorization met a nonpositive pivot."""

    exit_code = ExitCode.NUMERICAL

    def __init__(self, message: str, pivot: Optional[int] = None):
        self.pivot = pivot
        super().__init__(
            message=message,
            kind=ErrorKind.NUMERICAL,
            index=pivot
        )


# Utility functions for common error scenarios

def require_index(name: str, value: int, lower: int = 1, upper: Optional[int] = None) -> int:
    """Validate an integer index against [lower, upper]."""
    if int(value) != value or value < lower or (upper is not None and value > upper):
        bound = f"[{lower}, {upper}]" if upper is not None else f">= {lower}"
        raise InvalidArgumentError([name], f"must be an integer in {bound}, got {value!r}")
    return int(value)


def require_positive(name: str, value: float) -> float:
    """Validate a strictly positive real."""
    if not value > 0:
        raise InvalidArgumentError([name], f"must be positive, got {value!r}")
    return float(value)
