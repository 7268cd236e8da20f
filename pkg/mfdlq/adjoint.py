"""
Adjoint recursion and Hamiltonian stationarity on an exact scenario tree.

Sign convention: p is the negative costate, p_N = -Q_N x_N - Qbar_N E x_N.
The stationarity residual at a node equals minus one half of the tree-cost
gradient with respect to that node's control, divided by the node probability.
"""

import logging
from typing import Dict, Tuple

import numpy as np

from .exceptions import ShapeMismatchError
from .models import AdjointCertificate, ProblemSpec, RiccatiSolution, ScenarioTree, TreeControl
from .tree import check_controls, feedback_controls, tree_states

logger = logging.getLogger(__name__)


def _conditional(adjoint: np.ndarray, noise: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """E{p | parent} and E{p w | parent} over the two children of every parent."""
    weighted = noise[:, None] * adjoint
    cond_p = 0.5 * (adjoint[0::2] + adjoint[1::2])
    cond_pw = 0.5 * (weighted[0::2] + weighted[1::2])
    return cond_p, cond_pw


def compute_adjoint(
    spec: ProblemSpec, tree: ScenarioTree, controls: TreeControl
) -> Dict[int, np.ndarray]:
    """
    Run the adjoint backward recursion for fixed adapted controls.

    p_N = -Q_N x_N - Qbar_N E x_N and, for k = N-1..1,
    p_k = A^T E{p_{k+1}|node} + Abar^T E p_{k+1} + C^T E{p_{k+1} w_{k+1}|node}
          + Cbar^T E{p_{k+1} w_{k+1}} - Q x_k - Qbar E x_k.

    Args:
        spec: Problem the tree was built from.
        tree: Scenario tree.
        controls: One control per node and stage.

    Returns:
        Dict mapping k = 1..N to an array of shape (2**k, n).

    Raises:
        ShapeMismatchError: If the controls do not fit the tree.
    """
    states = tree_states(spec, tree, controls)
    N = spec.N
    x = states[N]
    mean_x = tree.probabilities[N] @ x
    adjoint = {N: -(x @ spec.terminal_Q) - spec.terminal_Qbar @ mean_x}

    for k in range(N - 1, 0, -1):
        st = spec.stages[k]
        upper = adjoint[k + 1]
        w = tree.noise[k + 1]
        cond_p, cond_pw = _conditional(upper, w)
        prob_next = tree.probabilities[k + 1]
        mean_p = prob_next @ upper
        mean_pw = prob_next @ (w[:, None] * upper)
        x = states[k]
        mean_x = tree.probabilities[k] @ x
        adjoint[k] = (
            cond_p @ st.A
            + st.Abar.T @ mean_p
            + cond_pw @ st.C
            + st.Cbar.T @ mean_pw
            - x @ st.Q
            - st.Qbar @ mean_x
        )
    return adjoint


def _check_adjoint(spec: ProblemSpec, adjoint: Dict[int, np.ndarray]) -> None:
    if sorted(adjoint) != list(range(1, spec.N + 1)):
        raise ShapeMismatchError(f"Adjoint must cover stages 1..{spec.N}, got {sorted(adjoint)}")
    for k, values in adjoint.items():
        if np.shape(values) != (2**k, spec.n):
            raise ShapeMismatchError(
                f"Adjoint at stage {k} has shape {np.shape(values)}, expected {(2**k, spec.n)}"
            )


def stationarity_residual(
    spec: ProblemSpec,
    tree: ScenarioTree,
    controls: TreeControl,
    adjoint: Dict[int, np.ndarray],
) -> AdjointCertificate:
    """
    Evaluate dH/du_k at every node.

    The residual at stage k is
    B^T E{p_{k+1}|node} + D^T E{p_{k+1} w_{k+1}|node} - R u_k(node) - Rbar E u_k.

    Args:
        spec: Problem the tree was built from.
        tree: Scenario tree.
        controls: Controls the adjoint was computed for.
        adjoint: Output of :func:`compute_adjoint`.

    Returns:
        AdjointCertificate: Adjoint, residuals of shape (2**k, r) and their max-norm.

    Raises:
        ShapeMismatchError: If the controls or the adjoint do not fit the tree.
    """
    check_controls(spec, tree, controls)
    _check_adjoint(spec, adjoint)

    residuals = {}
    for k, st in enumerate(spec.stages):
        cond_p, cond_pw = _conditional(np.asarray(adjoint[k + 1], dtype=float), tree.noise[k + 1])
        u = controls.controls[k]
        mean_u = tree.probabilities[k] @ u
        residuals[k] = cond_p @ st.B + cond_pw @ st.D - u @ st.R - st.Rbar @ mean_u
        logger.debug("Stage %d stationarity residual %.3g", k, float(np.max(np.abs(residuals[k]))))

    max_residual = max(float(np.max(np.abs(values))) for values in residuals.values())
    return AdjointCertificate(adjoint=adjoint, residuals=residuals, max_residual=max_residual)


def certify(spec: ProblemSpec, sol: RiccatiSolution, tree: ScenarioTree) -> AdjointCertificate:
    """Stationarity certificate of the solution's feedback controls realised on ``tree``."""
    controls = feedback_controls(spec, sol, tree)
    certificate = stationarity_residual(spec, tree, controls, compute_adjoint(spec, tree, controls))
    logger.info("Adjoint certificate: max residual %.3g", certificate.max_residual)
    return certificate
