"""
Problem loading, serialization, validation and random generation.
"""

import json
import logging
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import ValidationError as PydanticValidationError
from scipy.linalg import eigvalsh

from .config import PD_TOLERANCE, PSD_TOLERANCE, SYMMETRY_TOLERANCE, seed_sequence
from .exceptions import InvalidProblemError, MissingFieldError, ProblemFormatError
from .models import (
    STAGE_MATRICES,
    NoiseKind,
    NoiseModel,
    ProblemDocument,
    ProblemSpec,
    StageBlock,
    StageData,
    ValidationReport,
    Violation,
)
from .serialization import dumps

logger = logging.getLogger(__name__)


def _parse_document(text: str) -> ProblemDocument:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFormatError(f"Problem file is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ProblemFormatError("Problem file must contain a JSON object")
    try:
        return ProblemDocument.model_validate(raw)
    except PydanticValidationError as exc:
        errors = exc.errors()
        for error in errors:
            if error["type"] == "missing":
                raise MissingFieldError(".".join(str(part) for part in error["loc"])) from exc
        first = errors[0]
        location = ".".join(str(part) for part in first["loc"]) or "<root>"
        raise ProblemFormatError(f"Invalid field '{location}': {first['msg']}") from exc


def _stage_from_block(block: StageBlock) -> StageData:
    return StageData(**{name: getattr(block, name) for name in STAGE_MATRICES})


def load_problem(text: str) -> ProblemSpec:
    """
    Parse a JSON problem document.

    Optional matrices default to zero; symmetric weights are symmetrized as
    (M + M^T) / 2; a single ``stage`` object is reused for every k.

    Args:
        text: Problem file content.

    Returns:
        ProblemSpec: Fully populated, dimension-checked problem.

    Raises:
        ProblemFormatError: If the document is malformed.
        MissingFieldError: If a required field is absent.
        DimensionMismatchError: If a matrix has the wrong shape.
    """
    document = _parse_document(text)
    if document.stages is None and document.stage is None:
        raise MissingFieldError("stages")
    if document.stages is not None and document.stage is not None:
        raise ProblemFormatError("Provide either 'stages' or 'stage', not both")

    if document.stages is not None:
        stages = tuple(_stage_from_block(block) for block in document.stages)
    else:
        assert document.stage is not None
        shared = _stage_from_block(document.stage)
        stages = tuple(shared for _ in range(document.N))

    spec = ProblemSpec(
        n=document.n,
        r=document.r,
        N=document.N,
        stages=stages,
        terminal_Q=document.terminal.Q,
        terminal_Qbar=document.terminal.Qbar,
        x0=document.x0,
        noise=document.noise,
    )
    logger.debug("Loaded problem n=%d r=%d N=%d", spec.n, spec.r, spec.N)
    return spec


def problem_document(spec: ProblemSpec) -> Dict[str, Any]:
    """Document form of a problem with every matrix written out."""
    return {
        "n": spec.n,
        "r": spec.r,
        "N": spec.N,
        "x0": spec.x0,
        "noise": {"kind": spec.noise.kind.value, "variance": spec.noise.variance},
        "terminal": {"Q": spec.terminal_Q, "Qbar": spec.terminal_Qbar},
        "stages": [
            {name: getattr(stage, name) for name in STAGE_MATRICES} for stage in spec.stages
        ],
    }


def dump_problem(spec: ProblemSpec) -> str:
    """Serialize a problem so that ``load_problem`` reproduces it exactly."""
    return dumps(problem_document(spec))


def _check_symmetric(matrix: np.ndarray, location: str, out: List[Violation]) -> None:
    asymmetry = float(np.max(np.abs(matrix - matrix.T))) if matrix.size else 0.0
    if asymmetry > SYMMETRY_TOLERANCE:
        out.append(
            Violation(location=location, description=f"{location} not symmetric", value=asymmetry)
        )


def _check_psd(matrix: np.ndarray, location: str, out: List[Violation]) -> None:
    smallest = float(eigvalsh(matrix)[0])
    if smallest < -PSD_TOLERANCE:
        out.append(
            Violation(
                location=location,
                description=f"{location} not positive semidefinite (min eigenvalue {smallest:.6g})",
                value=smallest,
            )
        )


def _check_pd(matrix: np.ndarray, location: str, out: List[Violation]) -> None:
    smallest = float(eigvalsh(matrix)[0])
    if smallest < PD_TOLERANCE:
        out.append(
            Violation(
                location=location,
                description=f"{location} not positive definite (min eigenvalue {smallest:.6g})",
                value=smallest,
            )
        )


def validate(spec: ProblemSpec) -> ValidationReport:
    """
    Check symmetry and assumption (J) at every stage and at the terminal.

    Q_k and Q_k + Qbar_k must be positive semidefinite, R_k and R_k + Rbar_k
    positive definite, and likewise Q_N and Q_N + Qbar_N. Violations are
    reported, never raised.

    Args:
        spec: Problem to check.

    Returns:
        ValidationReport: ``ok`` plus the list of violations.
    """
    violations: List[Violation] = []
    for k, stage in enumerate(spec.stages):
        for name in ("Q", "Qbar", "R", "Rbar"):
            _check_symmetric(getattr(stage, name), f"{name}_{k}", violations)
        _check_psd(stage.Q, f"Q_{k}", violations)
        _check_psd(stage.Q + stage.Qbar, f"Q_{k}+Qbar_{k}", violations)
        _check_pd(stage.R, f"R_{k}", violations)
        _check_pd(stage.R + stage.Rbar, f"R_{k}+Rbar_{k}", violations)

    _check_symmetric(spec.terminal_Q, "Q_N", violations)
    _check_symmetric(spec.terminal_Qbar, "Qbar_N", violations)
    _check_psd(spec.terminal_Q, "Q_N", violations)
    _check_psd(spec.terminal_Q + spec.terminal_Qbar, "Q_N+Qbar_N", violations)

    report = ValidationReport.from_violations(violations)
    if not report.ok:
        logger.info("Problem violates assumption (J) in %d place(s)", len(violations))
    return report


def _gram(rng: np.random.Generator, size: int) -> np.ndarray:
    factor = rng.uniform(-1.0, 1.0, size=(size, size))
    return factor.T @ factor


def generate_random(
    n: int,
    r: int,
    N: int,
    seed: int,
    meanfield: bool,
    noise: Optional[NoiseModel] = None,
) -> ProblemSpec:
    """
    Draw a random instance that satisfies assumption (J) by construction.

    Coefficients are uniform in [-1, 1]. Weights are Gram matrices:
    Q = M^T M, Q + Qbar = M'^T M', R = L^T L + 0.1 I, R + Rbar = L'^T L' + 0.1 I.
    Without ``meanfield`` every barred matrix is zero.

    Args:
        n: State dimension.
        r: Control dimension.
        N: Horizon.
        seed: Any integer; equal seeds give equal problems.
        meanfield: Whether to draw barred matrices.
        noise: Noise law; defaults to unit-variance Rademacher.

    Returns:
        ProblemSpec: The generated problem.

    Raises:
        InvalidProblemError: If n, r or N is smaller than 1.
    """
    if n < 1 or r < 1 or N < 1:
        raise InvalidProblemError(
            f"Dimensions must be positive, got n={n}, r={r}, N={N}",
            details={"n": n, "r": r, "N": N},
        )
    rng = np.random.default_rng(seed_sequence(seed))
    ridge = 0.1 * np.eye(r)

    stages = []
    for _ in range(N):
        A = rng.uniform(-1.0, 1.0, size=(n, n))
        B = rng.uniform(-1.0, 1.0, size=(n, r))
        C = rng.uniform(-1.0, 1.0, size=(n, n))
        D = rng.uniform(-1.0, 1.0, size=(n, r))
        Q = _gram(rng, n)
        R = _gram(rng, r) + ridge
        if meanfield:
            Abar = rng.uniform(-1.0, 1.0, size=(n, n))
            Cbar = rng.uniform(-1.0, 1.0, size=(n, n))
            Qbar = _gram(rng, n) - Q
            Rbar = _gram(rng, r) + ridge - R
        else:
            Abar = Cbar = Qbar = np.zeros((n, n))
            Rbar = np.zeros((r, r))
        stages.append(
            StageData(A=A, Abar=Abar, B=B, C=C, Cbar=Cbar, D=D, Q=Q, Qbar=Qbar, R=R, Rbar=Rbar)
        )

    terminal_Q = _gram(rng, n)
    terminal_Qbar = _gram(rng, n) - terminal_Q if meanfield else np.zeros((n, n))
    x0 = rng.uniform(-1.0, 1.0, size=n)

    return ProblemSpec(
        n=n,
        r=r,
        N=N,
        stages=tuple(stages),
        terminal_Q=terminal_Q,
        terminal_Qbar=terminal_Qbar,
        x0=x0,
        noise=noise or NoiseModel(kind=NoiseKind.RADEMACHER, variance=1.0),
    )
