"""
Exception classes for the mfdlq toolkit.
"""

from typing import Any, Dict, Optional, Sequence, Tuple


class MFDLQError(Exception):
    """Base exception for all mfdlq errors."""

    def __init__(
        self,
        message: str,
        exit_code: Optional[int] = None,
        details: Optional[Dict[str, Any]] = None,
    ) -> None:
        super().__init__(message)
        self.message = message
        self.exit_code = exit_code
        self.details = details or {}

    def __str__(self) -> str:
        return self.message

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(message={self.message!r}, exit_code={self.exit_code})"


class ProblemFormatError(MFDLQError):
    """Raised when a problem or solution document cannot be parsed."""

    def __init__(
        self,
        message: str = "Malformed problem document",
        exit_code: Optional[int] = 2,
        details: Optional[Dict[str, Any]] = None,
    ) -> None:
        super().__init__(message, exit_code, details)


class MissingFieldError(ProblemFormatError):
    """Raised when a required field is absent from a document."""

    def __init__(self, field: str, exit_code: Optional[int] = 2) -> None:
        super().__init__(f"Missing required field '{field}'", exit_code, {"field": field})
        self.field = field


class DimensionMismatchError(MFDLQError):
    """Raised when a matrix or vector does not have the expected shape."""

    def __init__(
        self,
        field: str,
        expected: Tuple[int, ...],
        actual: Tuple[int, ...],
        exit_code: Optional[int] = 2,
    ) -> None:
        expected_text = "x".join(str(d) for d in expected)
        actual_text = "x".join(str(d) for d in actual) or "scalar"
        super().__init__(
            f"Dimension mismatch in '{field}': expected {expected_text}, got {actual_text}",
            exit_code,
            {"field": field, "expected": list(expected), "actual": list(actual)},
        )
        self.field = field
        self.expected = tuple(expected)
        self.actual = tuple(actual)


class InvalidProblemError(MFDLQError):
    """Raised when arguments describing a problem or policy are invalid."""

    def __init__(
        self,
        message: str,
        exit_code: Optional[int] = 2,
        details: Optional[Dict[str, Any]] = None,
    ) -> None:
        super().__init__(message, exit_code, details)


class NonZeroMeanFieldError(MFDLQError):
    """Raised when the classical solver is given a spec with mean-field terms."""

    def __init__(self, fields: Sequence[str], exit_code: Optional[int] = 2) -> None:
        names = ", ".join(fields)
        super().__init__(
            f"Classical solver requires all barred matrices to be zero; nonzero: {names}",
            exit_code,
            {"fields": list(fields)},
        )
        self.fields = list(fields)


class SingularDenominatorError(MFDLQError):
    """Raised when a Riccati denominator is not positive definite."""

    def __init__(
        self,
        stage: int,
        branch: str = "deviation",
        exit_code: Optional[int] = 1,
    ) -> None:
        super().__init__(
            f"Riccati {branch} denominator at stage {stage} is not positive definite",
            exit_code,
            {"stage": stage, "branch": branch},
        )
        self.stage = stage
        self.branch = branch


class StageOutOfRangeError(MFDLQError):
    """Raised when a stage index is outside [0, N)."""

    def __init__(self, stage: int, horizon: int, exit_code: Optional[int] = 2) -> None:
        super().__init__(
            f"Stage {stage} out of range for horizon {horizon}",
            exit_code,
            {"stage": stage, "horizon": horizon},
        )
        self.stage = stage
        self.horizon = horizon


class TreeTooLargeError(MFDLQError):
    """Raised when the scenario tree decision dimension exceeds the cap."""

    def __init__(self, required: int, allowed: int, exit_code: Optional[int] = 2) -> None:
        super().__init__(
            f"Scenario tree needs decision dimension {required} > allowed {allowed}",
            exit_code,
            {"required": required, "allowed": allowed},
        )
        self.required = required
        self.allowed = allowed


class WrongNoiseKindError(MFDLQError):
    """Raised when an exact tree is requested for non-enumerable noise."""

    def __init__(self, kind: str, exit_code: Optional[int] = 2) -> None:
        super().__init__(
            f"Scenario tree requires rademacher noise, got {kind}",
            exit_code,
            {"kind": kind},
        )
        self.kind = kind


class SingularHessianError(MFDLQError):
    """Raised when the assembled tree Hessian is not positive definite."""

    def __init__(
        self,
        message: str = "Tree cost Hessian is not positive definite",
        exit_code: Optional[int] = 1,
    ) -> None:
        super().__init__(message, exit_code)


class OracleConsistencyError(MFDLQError):
    """Raised when the two optimal-value formulas of the oracle disagree."""

    def __init__(self, direct: float, reduced: float, exit_code: Optional[int] = 1) -> None:
        super().__init__(
            f"Oracle value formulas disagree: direct={direct!r}, reduced={reduced!r}",
            exit_code,
            {"direct": direct, "reduced": reduced},
        )
        self.direct = direct
        self.reduced = reduced


class ShapeMismatchError(MFDLQError):
    """Raised when tree controls or adjoints do not match the tree layout."""

    def __init__(self, message: str, exit_code: Optional[int] = 2) -> None:
        super().__init__(message, exit_code)


class SimulationError(MFDLQError):
    """Raised when a Monte-Carlo run is requested with invalid arguments."""

    def __init__(
        self, message: str = "Invalid simulation request", exit_code: Optional[int] = 2
    ) -> None:
        super().__init__(message, exit_code)
