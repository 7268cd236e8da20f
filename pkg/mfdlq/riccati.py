"""
Backward Riccati synthesis for the mean-field LQ problem.

The state is split into its mean z_k = E x_k and deviation y_k = x_k - z_k.
The deviation part is governed by P_k and gain K_k, the mean part by Pi_k and
gain Kbar_k. Without barred matrices both recursions coincide with the
classical Riccati difference equation.
"""

import json
import logging
from typing import Any, Dict, Tuple

import numpy as np
from pydantic import ValidationError as PydanticValidationError
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .exceptions import (
    DimensionMismatchError,
    MissingFieldError,
    NonZeroMeanFieldError,
    ProblemFormatError,
    SingularDenominatorError,
    StageOutOfRangeError,
)
from .models import ProblemSpec, RiccatiSolution
from .serialization import dumps

logger = logging.getLogger(__name__)


def _riccati_step(
    drift_weight: np.ndarray,
    diffusion_weight: np.ndarray,
    A: np.ndarray,
    B: np.ndarray,
    C: np.ndarray,
    D: np.ndarray,
    Q: np.ndarray,
    R: np.ndarray,
    variance: float,
    stage: int,
    branch: str,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    One backward step.

    With W = drift_weight and V = diffusion_weight:
        S = R + B^T W B + s2 D^T V D
        G = B^T W A + s2 D^T V C
        K = S^{-1} G
        P = Q + A^T W A + s2 C^T V C - G^T K
    """
    S = R + B.T @ drift_weight @ B + variance * (D.T @ diffusion_weight @ D)
    G = B.T @ drift_weight @ A + variance * (D.T @ diffusion_weight @ C)
    try:
        factor = cho_factor(S, lower=True)
    except LinAlgError as exc:
        raise SingularDenominatorError(stage, branch) from exc
    K = cho_solve(factor, G)
    P = Q + A.T @ drift_weight @ A + variance * (C.T @ diffusion_weight @ C) - G.T @ K
    return K, (P + P.T) / 2.0


def solve_classical(spec: ProblemSpec) -> RiccatiSolution:
    """
    Solve the Riccati difference equation of a problem without mean-field terms.

    P_N = Q_N and, for k = N-1..0,
    P_k = Q + A^T P A + s2 C^T P C
          - (A^T P B + s2 C^T P D)(R + B^T P B + s2 D^T P D)^{-1}(B^T P A + s2 D^T P C)
    with P = P_{k+1} and s2 the noise variance.

    Args:
        spec: Problem whose barred matrices are all zero.

    Returns:
        RiccatiSolution: P and gains K, with Pi = P and Kbar = K.

    Raises:
        NonZeroMeanFieldError: If any barred matrix is nonzero.
        SingularDenominatorError: If a denominator is not positive definite.
    """
    barred = spec.barred_fields()
    if barred:
        raise NonZeroMeanFieldError(barred)

    N, n, r = spec.N, spec.n, spec.r
    variance = spec.noise.variance
    P = np.empty((N + 1, n, n))
    K = np.empty((N, r, n))
    P[N] = spec.terminal_Q
    for k in range(N - 1, -1, -1):
        st = spec.stages[k]
        K[k], P[k] = _riccati_step(
            P[k + 1], P[k + 1], st.A, st.B, st.C, st.D, st.Q, st.R, variance, k, "deviation"
        )
        logger.debug("Classical step k=%d done", k)

    logger.info("Classical Riccati recursion solved over %d stage(s)", N)
    return RiccatiSolution(P=P, Pi=P.copy(), K=K, Kbar=K.copy(), classical=True)


def solve_meanfield(spec: ProblemSpec) -> RiccatiSolution:
    """
    Solve the coupled deviation/mean Riccati recursions.

    With A+ = A + Abar and C+ = C + Cbar, P_N = Q_N and Pi_N = Q_N + Qbar_N:
        K_k    = (R + B^T P B + s2 D^T P D)^{-1}(B^T P A + s2 D^T P C)
        P_k    = Q + A^T P A + s2 C^T P C - (A^T P B + s2 C^T P D) K_k
        Kbar_k = (R + Rbar + B^T Pi B + s2 D^T P D)^{-1}(B^T Pi A+ + s2 D^T P C+)
        Pi_k   = Q + Qbar + A+^T Pi A+ + s2 C+^T P C+ - (A+^T Pi B + s2 C+^T P D) Kbar_k
    where P = P_{k+1} and Pi = Pi_{k+1}. The mean gets its drift from Pi and
    its diffusion cost from P, because the noise feeds the deviation.

    Args:
        spec: Any problem satisfying assumption (J).

    Returns:
        RiccatiSolution: Both sequences and both gains.

    Raises:
        SingularDenominatorError: If a denominator is not positive definite.
    """
    N, n, r = spec.N, spec.n, spec.r
    variance = spec.noise.variance
    P = np.empty((N + 1, n, n))
    Pi = np.empty((N + 1, n, n))
    K = np.empty((N, r, n))
    Kbar = np.empty((N, r, n))
    P[N] = spec.terminal_Q
    Pi[N] = spec.terminal_Q + spec.terminal_Qbar
    for k in range(N - 1, -1, -1):
        st = spec.stages[k]
        K[k], P[k] = _riccati_step(
            P[k + 1], P[k + 1], st.A, st.B, st.C, st.D, st.Q, st.R, variance, k, "deviation"
        )
        Kbar[k], Pi[k] = _riccati_step(
            Pi[k + 1],
            P[k + 1],
            st.A + st.Abar,
            st.B,
            st.C + st.Cbar,
            st.D,
            st.Q + st.Qbar,
            st.R + st.Rbar,
            variance,
            k,
            "mean",
        )
        logger.debug("Mean-field step k=%d done", k)

    logger.info("Mean-field Riccati recursion solved over %d stage(s)", N)
    return RiccatiSolution(P=P, Pi=Pi, K=K, Kbar=Kbar, classical=False)


def solve(spec: ProblemSpec, classical: bool = False) -> RiccatiSolution:
    """Dispatch to :func:`solve_classical` or :func:`solve_meanfield`."""
    return solve_classical(spec) if classical else solve_meanfield(spec)


def feedback(sol: RiccatiSolution, k: int, x: np.ndarray, mean_x: np.ndarray) -> np.ndarray:
    """
    Optimal control at stage k: -K_k (x - mean_x) - Kbar_k mean_x.

    Raises:
        StageOutOfRangeError: If k is not in [0, N).
    """
    if not 0 <= k < sol.N:
        raise StageOutOfRangeError(k, sol.N)
    x = np.asarray(x, dtype=float)
    mean_x = np.asarray(mean_x, dtype=float)
    return -sol.K[k] @ (x - mean_x) - sol.Kbar[k] @ mean_x


def optimal_value(sol: RiccatiSolution, x0: np.ndarray) -> float:
    """Optimal cost x0^T Pi_0 x0 for a deterministic initial state."""
    x0 = np.asarray(x0, dtype=float)
    return float(x0 @ sol.value_matrix @ x0)


def check_compatible(spec: ProblemSpec, sol: RiccatiSolution) -> None:
    """Raise DimensionMismatchError unless ``sol`` has the shapes of ``spec``."""
    expected = (spec.N, spec.r, spec.n)
    if sol.K.shape != expected:
        raise DimensionMismatchError("K", expected, sol.K.shape)


def solution_document(sol: RiccatiSolution, x0: np.ndarray) -> Dict[str, Any]:
    """Document form of a solution, with the optimal value for ``x0``."""
    return {
        "classical": sol.classical,
        "P": sol.P,
        "Pi": sol.Pi,
        "K": sol.K,
        "Kbar": sol.Kbar,
        "optimal_value": optimal_value(sol, x0),
    }


def dump_solution(sol: RiccatiSolution, x0: np.ndarray) -> str:
    return dumps(solution_document(sol, x0))


def load_solution(text: str) -> RiccatiSolution:
    """
    Read a solution document written by :func:`dump_solution`.

    Raises:
        ProblemFormatError: If the document is malformed.
        MissingFieldError: If P, Pi, K or Kbar is absent.
        DimensionMismatchError: If the sequences have inconsistent shapes.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFormatError(f"Solution file is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ProblemFormatError("Solution file must contain a JSON object")
    for name in ("P", "Pi", "K", "Kbar"):
        if name not in raw:
            raise MissingFieldError(name)
    try:
        return RiccatiSolution(
            P=raw["P"],
            Pi=raw["Pi"],
            K=raw["K"],
            Kbar=raw["Kbar"],
            classical=bool(raw.get("classical", False)),
        )
    except PydanticValidationError as exc:
        raise ProblemFormatError(f"Invalid solution document: {exc}") from exc
