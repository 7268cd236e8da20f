"""
Pydantic models for mfdlq problems, solutions and reports.
"""

from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationInfo, field_validator, model_validator

from .exceptions import (
    DimensionMismatchError,
    InvalidProblemError,
    ProblemFormatError,
    ShapeMismatchError,
)

STAGE_MATRICES = ("A", "Abar", "B", "C", "Cbar", "D", "Q", "Qbar", "R", "Rbar")
BARRED_MATRICES = ("Abar", "Cbar", "Qbar", "Rbar")

_ARRAY_CONFIG = ConfigDict(extra="forbid", frozen=True, arbitrary_types_allowed=True)


def as_array(value: Any, ndim: int, field: str) -> np.ndarray:
    """Copy ``value`` into a read-only finite float64 array of rank ``ndim``."""
    try:
        array = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ProblemFormatError(f"Field '{field}' is not a numeric array: {exc}") from exc
    if array.ndim != ndim:
        raise ProblemFormatError(
            f"Field '{field}' must have {ndim} dimension(s), got shape {array.shape}"
        )
    if not np.all(np.isfinite(array)):
        raise ProblemFormatError(f"Field '{field}' contains non-finite values")
    array.setflags(write=False)
    return array


def as_symmetric(value: Any, field: str) -> np.ndarray:
    """Like :func:`as_array` for a square matrix, symmetrized as (M + M^T) / 2."""
    array = as_array(value, 2, field)
    rows, cols = array.shape
    if rows != cols:
        raise DimensionMismatchError(field, (rows, rows), array.shape)
    sym = (array + array.T) / 2.0
    sym.setflags(write=False)
    return sym


# Problem Models

class NoiseKind(str, Enum):
    """Distribution of the scalar martingale-difference noise w_k."""

    GAUSSIAN = "gaussian"
    RADEMACHER = "rademacher"


class NoiseModel(BaseModel):
    """Noise law: mean zero, second moment ``variance``, finite fourth moment."""

    kind: NoiseKind = Field(description="Noise distribution")
    variance: float = Field(default=1.0, gt=0, description="Per-step second moment")

    model_config = ConfigDict(extra="forbid", frozen=True)

    @property
    def std(self) -> float:
        """Standard deviation sigma."""
        return float(np.sqrt(self.variance))


class StageData(BaseModel):
    """Coefficients and weights of one stage k."""

    A: np.ndarray = Field(description="Drift on x_k (n x n)")
    Abar: np.ndarray = Field(description="Drift on E x_k (n x n)")
    B: np.ndarray = Field(description="Drift on u_k (n x r)")
    C: np.ndarray = Field(description="Diffusion on x_k (n x n)")
    Cbar: np.ndarray = Field(description="Diffusion on E x_k (n x n)")
    D: np.ndarray = Field(description="Diffusion on u_k (n x r)")
    Q: np.ndarray = Field(description="State weight (n x n, symmetric)")
    Qbar: np.ndarray = Field(description="Mean-state weight (n x n, symmetric)")
    R: np.ndarray = Field(description="Control weight (r x r, symmetric)")
    Rbar: np.ndarray = Field(description="Mean-control weight (r x r, symmetric)")

    model_config = _ARRAY_CONFIG

    @model_validator(mode="before")
    @classmethod
    def _fill_optional(cls, data: Any) -> Any:
        """Optional matrices default to zero blocks shaped from A and B."""
        if not isinstance(data, dict) or "A" not in data or "B" not in data:
            return data
        try:
            a_shape = np.shape(data["A"])
            b_shape = np.shape(data["B"])
        except ValueError:
            # Ragged input; the field validators report it.
            return data
        if len(a_shape) != 2 or len(b_shape) != 2:
            return data
        n, r = a_shape[0], b_shape[1]
        defaults = {
            "Abar": (n, n),
            "C": (n, n),
            "Cbar": (n, n),
            "D": (n, r),
            "Qbar": (n, n),
            "Rbar": (r, r),
        }
        filled = dict(data)
        for name, shape in defaults.items():
            if filled.get(name) is None:
                filled[name] = np.zeros(shape)
        return filled

    @field_validator("A", "Abar", "B", "C", "Cbar", "D", mode="before")
    @classmethod
    def _coefficient(cls, value: Any, info: ValidationInfo) -> np.ndarray:
        return as_array(value, 2, str(info.field_name))

    @field_validator("Q", "Qbar", "R", "Rbar", mode="before")
    @classmethod
    def _weight(cls, value: Any, info: ValidationInfo) -> np.ndarray:
        return as_symmetric(value, str(info.field_name))

    @property
    def n(self) -> int:
        return int(self.A.shape[0])

    @property
    def r(self) -> int:
        return int(self.B.shape[1])

    def barred_fields(self) -> List[str]:
        """Names of the barred matrices that are not identically zero."""
        return [name for name in BARRED_MATRICES if np.any(getattr(self, name))]


class ProblemSpec(BaseModel):
    """A complete finite-horizon mean-field LQ instance."""

    n: int = Field(ge=1, description="State dimension")
    r: int = Field(ge=1, description="Control dimension")
    N: int = Field(ge=1, description="Horizon (number of stages)")
    stages: Tuple[StageData, ...] = Field(description="Stage data for k = 0..N-1")
    terminal_Q: np.ndarray = Field(description="Terminal weight Q_N")
    terminal_Qbar: np.ndarray = Field(description="Terminal mean weight Qbar_N")
    x0: np.ndarray = Field(description="Deterministic initial state")
    noise: NoiseModel = Field(description="Noise law")

    model_config = _ARRAY_CONFIG

    @model_validator(mode="before")
    @classmethod
    def _fill_terminal(cls, data: Any) -> Any:
        if isinstance(data, dict) and data.get("terminal_Qbar") is None and "terminal_Q" in data:
            data = dict(data)
            data["terminal_Qbar"] = np.zeros(np.shape(data["terminal_Q"]))
        return data

    @field_validator("terminal_Q", "terminal_Qbar", mode="before")
    @classmethod
    def _terminal(cls, value: Any, info: ValidationInfo) -> np.ndarray:
        return as_symmetric(value, str(info.field_name))

    @field_validator("x0", mode="before")
    @classmethod
    def _initial_state(cls, value: Any) -> np.ndarray:
        return as_array(value, 1, "x0")

    @model_validator(mode="after")
    def _check_dimensions(self) -> "ProblemSpec":
        n, r = self.n, self.r
        if len(self.stages) != self.N:
            raise DimensionMismatchError("stages", (self.N,), (len(self.stages),))
        expected = {
            "A": (n, n),
            "Abar": (n, n),
            "B": (n, r),
            "C": (n, n),
            "Cbar": (n, n),
            "D": (n, r),
            "Q": (n, n),
            "Qbar": (n, n),
            "R": (r, r),
            "Rbar": (r, r),
        }
        for k, stage in enumerate(self.stages):
            for name in STAGE_MATRICES:
                actual = getattr(stage, name).shape
                if actual != expected[name]:
                    raise DimensionMismatchError(f"stages[{k}].{name}", expected[name], actual)
        for name in ("terminal_Q", "terminal_Qbar"):
            actual = getattr(self, name).shape
            if actual != (n, n):
                raise DimensionMismatchError(name, (n, n), actual)
        if self.x0.shape != (n,):
            raise DimensionMismatchError("x0", (n,), self.x0.shape)
        return self

    def barred_fields(self) -> List[str]:
        """Locations of every nonzero barred matrix, stage-qualified."""
        names = [
            f"stages[{k}].{name}"
            for k, stage in enumerate(self.stages)
            for name in stage.barred_fields()
        ]
        if np.any(self.terminal_Qbar):
            names.append("terminal_Qbar")
        return names

    @property
    def has_meanfield(self) -> bool:
        return bool(self.barred_fields())


# Problem File Schema

Matrix = List[List[float]]


class StageBlock(BaseModel):
    """One stage object of a problem file."""

    A: Matrix = Field(description="Drift on x_k")
    Abar: Optional[Matrix] = Field(default=None, description="Drift on E x_k")
    B: Matrix = Field(description="Drift on u_k")
    C: Optional[Matrix] = Field(default=None, description="Diffusion on x_k")
    Cbar: Optional[Matrix] = Field(default=None, description="Diffusion on E x_k")
    D: Optional[Matrix] = Field(default=None, description="Diffusion on u_k")
    Q: Matrix = Field(description="State weight")
    Qbar: Optional[Matrix] = Field(default=None, description="Mean-state weight")
    R: Matrix = Field(description="Control weight")
    Rbar: Optional[Matrix] = Field(default=None, description="Mean-control weight")

    model_config = ConfigDict(extra="forbid")


class TerminalBlock(BaseModel):
    """Terminal weights of a problem file."""

    Q: Matrix = Field(description="Terminal weight")
    Qbar: Optional[Matrix] = Field(default=None, description="Terminal mean weight")

    model_config = ConfigDict(extra="forbid")


class ProblemDocument(BaseModel):
    """Top-level problem file."""

    n: int = Field(ge=1, description="State dimension")
    r: int = Field(ge=1, description="Control dimension")
    N: int = Field(ge=1, description="Horizon")
    x0: List[float] = Field(description="Initial state")
    noise: NoiseModel = Field(description="Noise law")
    terminal: TerminalBlock = Field(description="Terminal weights")
    stages: Optional[List[StageBlock]] = Field(default=None, description="Per-stage data")
    stage: Optional[StageBlock] = Field(default=None, description="Time-invariant stage data")

    model_config = ConfigDict(extra="forbid")


# Validation Models

class Violation(BaseModel):
    """One failed condition of assumption (J) or of symmetry."""

    location: str = Field(description="Matrix the condition applies to, e.g. 'R_0'")
    description: str = Field(description="Human-readable reason")
    value: Optional[float] = Field(default=None, description="Offending eigenvalue or asymmetry")

    model_config = ConfigDict(extra="forbid", frozen=True)


class ValidationReport(BaseModel):
    """Outcome of checking a problem against assumption (J)."""

    ok: bool = Field(description="True iff no violations were found")
    violations: List[Violation] = Field(default_factory=list, description="Failed conditions")

    model_config = ConfigDict(extra="forbid", frozen=True)

    @model_validator(mode="after")
    def _ok_iff_clean(self) -> "ValidationReport":
        if self.ok != (not self.violations):
            raise ValueError("ok must be true exactly when there are no violations")
        return self

    @classmethod
    def from_violations(cls, violations: List[Violation]) -> "ValidationReport":
        return cls(ok=not violations, violations=violations)

    def to_document(self) -> Dict[str, Any]:
        return {
            "ok": self.ok,
            "violations": [
                {"location": v.location, "description": v.description, "value": v.value}
                for v in self.violations
            ],
        }


# Solution Models

class RiccatiSolution(BaseModel):
    """Backward Riccati sequences and feedback gains."""

    P: np.ndarray = Field(description="Deviation Riccati matrices, shape (N+1, n, n)")
    Pi: np.ndarray = Field(description="Mean Riccati matrices, shape (N+1, n, n)")
    K: np.ndarray = Field(description="Deviation gains, shape (N, r, n)")
    Kbar: np.ndarray = Field(description="Mean gains, shape (N, r, n)")
    classical: bool = Field(default=False, description="Produced by the barred-free recursion")

    model_config = _ARRAY_CONFIG

    @field_validator("P", "Pi", "K", "Kbar", mode="before")
    @classmethod
    def _sequence(cls, value: Any, info: ValidationInfo) -> np.ndarray:
        return as_array(value, 3, str(info.field_name))

    @model_validator(mode="after")
    def _check_shapes(self) -> "RiccatiSolution":
        steps, r, n = self.K.shape
        if steps < 1:
            raise DimensionMismatchError("K", (1, r, n), self.K.shape)
        for name, shape in (
            ("P", (steps + 1, n, n)),
            ("Pi", (steps + 1, n, n)),
            ("Kbar", (steps, r, n)),
        ):
            actual = getattr(self, name).shape
            if actual != shape:
                raise DimensionMismatchError(name, shape, actual)
        return self

    @property
    def N(self) -> int:
        return int(self.K.shape[0])

    @property
    def n(self) -> int:
        return int(self.K.shape[2])

    @property
    def r(self) -> int:
        return int(self.K.shape[1])

    @property
    def value_matrix(self) -> np.ndarray:
        """Pi_0, the quadratic form of the optimal value in x0."""
        return self.Pi[0]


# Simulation Models

class PolicyKind(str, Enum):
    """How controls are chosen along a simulated path."""

    RICCATI = "riccati"
    OPEN_LOOP = "open_loop"
    ZERO = "zero"


class Policy(BaseModel):
    """A control policy for the simulator."""

    kind: PolicyKind = Field(description="Policy family")
    solution: Optional[RiccatiSolution] = Field(default=None, description="Gains for feedback")
    controls: Optional[np.ndarray] = Field(default=None, description="Open-loop controls (N, r)")

    model_config = _ARRAY_CONFIG

    @field_validator("controls", mode="before")
    @classmethod
    def _controls(cls, value: Any) -> Optional[np.ndarray]:
        return None if value is None else as_array(value, 2, "controls")

    @model_validator(mode="after")
    def _check_payload(self) -> "Policy":
        if self.kind is PolicyKind.RICCATI and self.solution is None:
            raise InvalidProblemError("riccati policy needs a solution")
        if self.kind is PolicyKind.OPEN_LOOP and self.controls is None:
            raise InvalidProblemError("open-loop policy needs controls")
        return self

    @classmethod
    def riccati(cls, solution: RiccatiSolution) -> "Policy":
        return cls(kind=PolicyKind.RICCATI, solution=solution)

    @classmethod
    def open_loop(cls, controls: Any) -> "Policy":
        return cls(kind=PolicyKind.OPEN_LOOP, controls=controls)

    @classmethod
    def zero(cls) -> "Policy":
        return cls(kind=PolicyKind.ZERO)


class SimulationReport(BaseModel):
    """Monte-Carlo estimate of the cost functional."""

    num_paths: int = Field(ge=1, description="Number of simulated paths")
    seed: int = Field(description="Master seed")
    policy: PolicyKind = Field(description="Policy simulated")
    noise: NoiseModel = Field(description="Noise law used")
    mean_estimator: str = Field(description="'analytic' or 'sample' mean-field terms")
    per_path_cost: np.ndarray = Field(description="Cost of each path")
    mean_cost: float = Field(description="Arithmetic mean of per_path_cost")
    std_error: float = Field(ge=0, description="Sample std / sqrt(num_paths)")
    state_mean_trace: np.ndarray = Field(description="Empirical E x_k, shape (N+1, n)")
    analytic_mean_trace: np.ndarray = Field(description="Analytic E x_k, shape (N+1, n)")

    model_config = _ARRAY_CONFIG

    def to_document(self) -> Dict[str, Any]:
        return {
            "num_paths": self.num_paths,
            "seed": self.seed,
            "policy": self.policy.value,
            "noise": {"kind": self.noise.kind.value, "variance": self.noise.variance},
            "mean_estimator": self.mean_estimator,
            "mean_cost": self.mean_cost,
            "std_error": self.std_error,
            "state_mean_trace": self.state_mean_trace,
            "analytic_mean_trace": self.analytic_mean_trace,
        }


# Scenario Tree Models

class ScenarioTree(BaseModel):
    """Full binary tree of Rademacher outcomes; stage k holds 2**k nodes."""

    depth: int = Field(ge=1, description="Horizon N")
    sigma: float = Field(gt=0, description="Noise magnitude: each branch is +sigma or -sigma")
    probabilities: Tuple[np.ndarray, ...] = Field(description="Node probabilities per stage")
    noise: Tuple[np.ndarray, ...] = Field(description="Incoming noise value per node per stage")

    model_config = _ARRAY_CONFIG

    @property
    def branching(self) -> int:
        return 2

    def node_count(self, stage: int) -> int:
        return 2**stage

    def decision_dim(self, r: int) -> int:
        """Stacked control dimension r * (2**N - 1)."""
        return r * (2**self.depth - 1)

    def control_offset(self, stage: int, r: int) -> int:
        """Position of stage ``stage``'s first control in the stacked vector."""
        return r * (2**stage - 1)


class TreeControl(BaseModel):
    """One r-vector per information node; stage k holds an array (2**k, r)."""

    controls: Tuple[np.ndarray, ...] = Field(description="Controls per stage")

    model_config = _ARRAY_CONFIG

    @field_validator("controls", mode="before")
    @classmethod
    def _blocks(cls, value: Any) -> Tuple[np.ndarray, ...]:
        return tuple(as_array(block, 2, f"controls[{k}]") for k, block in enumerate(value))

    @model_validator(mode="after")
    def _check_layout(self) -> "TreeControl":
        if not self.controls:
            raise ShapeMismatchError("Tree controls need at least one stage")
        r = self.controls[0].shape[-1] if self.controls[0].ndim == 2 else -1
        for k, block in enumerate(self.controls):
            if block.shape != (2**k, r):
                raise ShapeMismatchError(
                    f"Stage {k} controls have shape {block.shape}, expected {(2**k, r)}"
                )
        return self

    @property
    def N(self) -> int:
        return len(self.controls)

    @property
    def r(self) -> int:
        return int(self.controls[0].shape[1])

    def stack(self) -> np.ndarray:
        """Concatenate all controls stage by stage, node by node."""
        return np.concatenate([block.ravel() for block in self.controls])

    @classmethod
    def from_vector(cls, vector: np.ndarray, r: int, N: int) -> "TreeControl":
        vector = np.asarray(vector, dtype=float)
        expected = r * (2**N - 1)
        if vector.shape != (expected,):
            raise ShapeMismatchError(
                f"Stacked controls have shape {vector.shape}, expected {(expected,)}"
            )
        blocks = []
        for k in range(N):
            start = r * (2**k - 1)
            blocks.append(vector[start:start + r * 2**k].reshape(2**k, r).copy())
        return cls(controls=tuple(blocks))


class QuadraticCost(BaseModel):
    """J(u) = u^T H u + 2 g^T u + c over stacked tree controls."""

    H: np.ndarray = Field(description="Symmetric Hessian half, shape (m, m)")
    g: np.ndarray = Field(description="Linear term, shape (m,)")
    c: float = Field(description="Constant term")

    model_config = _ARRAY_CONFIG

    @property
    def dimension(self) -> int:
        return int(self.g.shape[0])

    def evaluate(self, u: np.ndarray) -> float:
        u = np.asarray(u, dtype=float)
        return float(u @ self.H @ u + 2.0 * self.g @ u + self.c)

    def gradient(self, u: np.ndarray) -> np.ndarray:
        return 2.0 * (self.H @ np.asarray(u, dtype=float) + self.g)


class ComparisonReport(BaseModel):
    """Riccati solution versus the exact tree optimum."""

    value_riccati: float = Field(description="x0^T Pi_0 x0")
    value_tree: float = Field(description="Exact optimum over adapted controls")
    value_gap: float = Field(ge=0, description="|value_tree - value_riccati|")
    control_gap: float = Field(ge=0, description="Max-norm gap between tree and feedback controls")
    policy_gap: float = Field(description="Tree cost of the feedback controls minus the optimum")
    passed: bool = Field(description="All gaps within thresholds")

    model_config = ConfigDict(extra="forbid", frozen=True)

    def to_document(self) -> Dict[str, Any]:
        return {
            "value_riccati": self.value_riccati,
            "value_tree": self.value_tree,
            "value_gap": self.value_gap,
            "control_gap": self.control_gap,
            "policy_gap": self.policy_gap,
            "pass": self.passed,
        }


# Certificate Models

class AdjointCertificate(BaseModel):
    """Adjoint values and Hamiltonian stationarity residuals on a tree."""

    adjoint: Dict[int, np.ndarray] = Field(description="p_k per node for k = 1..N, shape (2**k, n)")
    residuals: Dict[int, np.ndarray] = Field(
        description="Residuals for k = 0..N-1, shape (2**k, r)"
    )
    max_residual: float = Field(ge=0, description="Largest residual max-norm")

    model_config = _ARRAY_CONFIG

    @property
    def stage_max_residuals(self) -> List[float]:
        return [float(np.max(np.abs(self.residuals[k]))) for k in sorted(self.residuals)]

    def to_document(self, verbose: bool = False) -> Dict[str, Any]:
        document: Dict[str, Any] = {
            "max_residual": self.max_residual,
            "stage_max_residuals": self.stage_max_residuals,
        }
        if verbose:
            document["nodes"] = {
                "adjoint": {str(k): self.adjoint[k] for k in sorted(self.adjoint)},
                "residuals": {str(k): self.residuals[k] for k in sorted(self.residuals)},
            }
        return document
