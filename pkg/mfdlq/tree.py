"""
Exact scenario-tree oracle for Rademacher noise.

Node j of stage k has children 2j (noise -sigma) and 2j+1 (noise +sigma),
each with conditional probability 1/2. Controls are stacked stage by stage and
node by node, so stage k's block starts at r * (2**k - 1).
"""

import logging
from typing import List, Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .config import (
    DEFAULT_MAX_DECISION_DIM,
    ORACLE_CONTROL_ATOL,
    ORACLE_FORMULA_RTOL,
    ORACLE_VALUE_RTOL,
)
from .exceptions import (
    OracleConsistencyError,
    ShapeMismatchError,
    SingularHessianError,
    TreeTooLargeError,
    WrongNoiseKindError,
)
from .models import (
    ComparisonReport,
    NoiseKind,
    ProblemSpec,
    QuadraticCost,
    RiccatiSolution,
    ScenarioTree,
    StageData,
    TreeControl,
)
from .riccati import check_compatible, optimal_value
from .serialization import PathLike, write_csv

logger = logging.getLogger(__name__)


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def build_tree(spec: ProblemSpec, max_decision_dim: int = DEFAULT_MAX_DECISION_DIM) -> ScenarioTree:
    """
    Enumerate the full binary noise tree of depth N.

    Args:
        spec: Problem with Rademacher noise.
        max_decision_dim: Largest allowed r * (2**N - 1).

    Returns:
        ScenarioTree: Probabilities 2**-k and branch noise +/- sigma per stage.

    Raises:
        WrongNoiseKindError: If the noise is not Rademacher.
        TreeTooLargeError: If the decision dimension exceeds the cap.
    """
    if spec.noise.kind is not NoiseKind.RADEMACHER:
        raise WrongNoiseKindError(spec.noise.kind.value)
    required = spec.r * (2**spec.N - 1)
    if required > max_decision_dim:
        raise TreeTooLargeError(required, max_decision_dim)

    sigma = spec.noise.std
    probabilities = tuple(_readonly(np.full(2**k, 0.5**k)) for k in range(spec.N + 1))
    noise = [_readonly(np.zeros(1))]
    for k in range(1, spec.N + 1):
        noise.append(_readonly(sigma * np.tile([-1.0, 1.0], 2 ** (k - 1))))
    logger.debug("Built scenario tree of depth %d, decision dimension %d", spec.N, required)
    return ScenarioTree(depth=spec.N, sigma=sigma, probabilities=probabilities, noise=tuple(noise))


def _parents(count: int) -> np.ndarray:
    return np.arange(count) // 2


# Nodes per batch when accumulating E x^T Q x; bounds the temporaries.
_NODE_CHUNK = 256


def _add_expected(
    H: np.ndarray, g: np.ndarray, F: np.ndarray, f: np.ndarray, p: np.ndarray, Q: np.ndarray
) -> float:
    """Add sum_j p_j (F_j u + f_j)^T Q (F_j u + f_j) to H and g; return the constant."""
    rows, active = F.shape[0] * F.shape[1], F.shape[2]
    weighted = np.matmul(Q, F) * p[:, None, None]
    H[:active, :active] += F.reshape(rows, active).T @ weighted.reshape(rows, active)
    Qf = (f @ ((Q + Q.T) / 2.0)) * p[:, None]
    g[:active] += np.tensordot(Qf, F, axes=([0, 1], [0, 1]))
    return float(np.sum(Qf * f))


def _add_mean(
    H: np.ndarray, g: np.ndarray, F_mean: np.ndarray, f_mean: np.ndarray, Qbar: np.ndarray
) -> float:
    active = F_mean.shape[1]
    H[:active, :active] += F_mean.T @ Qbar @ F_mean
    g[:active] += F_mean.T @ (Qbar @ f_mean)
    return float(f_mean @ Qbar @ f_mean)


def _children(
    st: StageData,
    sigma: float,
    F: np.ndarray,
    f: np.ndarray,
    F_mean: np.ndarray,
    f_mean: np.ndarray,
    width: int,
    r: int,
    first: int,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Affine maps of the children of parents ``first .. first + len(F) - 1``.

    Parent maps cover the ``active`` columns of earlier stages; children also
    depend on their parent's own control block, so they span ``width`` columns.
    """
    count, n, active = F.shape
    F_next = np.zeros((2 * count, n, width))
    f_next = np.empty((2 * count, n))
    rows = np.arange(count)[:, None]
    cols = active + (first + rows) * r + np.arange(r)
    for child, s in enumerate((-sigma, sigma)):
        state, mean = st.A + s * st.C, st.Abar + s * st.Cbar
        out = F_next[child::2]
        out[:, :, :active] = np.matmul(state, F) + mean @ F_mean
        out[rows, :, cols] = (st.B + s * st.D).T
        f_next[child::2] = f @ state.T + mean @ f_mean
    return F_next, f_next


def assemble_cost(spec: ProblemSpec, tree: ScenarioTree) -> QuadraticCost:
    """
    Build J(u) = u^T H u + 2 g^T u + c exactly over stacked adapted controls.

    Each node state is carried symbolically as x = F u + f, where F only spans
    the controls of earlier stages. Stage means are the probability-weighted
    sums of these affine maps, so every expectation in the cost is exact.
    Leaf maps are generated and consumed in batches and never held at once.

    Args:
        spec: Problem the tree was built from.
        tree: Scenario tree from :func:`build_tree`.

    Returns:
        QuadraticCost: H (symmetrized), g and c.
    """
    n, r, N = spec.n, spec.r, spec.N
    m = tree.decision_dim(r)
    H = np.zeros((m, m))
    g = np.zeros(m)
    c = 0.0

    F = np.zeros((1, n, 0))
    f = spec.x0[None, :].copy()
    for k, st in enumerate(spec.stages):
        p = tree.probabilities[k]
        count = p.shape[0]
        F_mean = np.tensordot(p, F, axes=1)
        f_mean = p @ f
        for start in range(0, count, _NODE_CHUNK):
            part = slice(start, start + _NODE_CHUNK)
            c += _add_expected(H, g, F[part], f[part], p[part], st.Q)
        c += _add_mean(H, g, F_mean, f_mean, st.Qbar)

        offset = tree.control_offset(k, r)
        width = offset + count * r
        block = H[offset:width, offset:width]
        block += np.kron(np.outer(p, p), st.Rbar)
        for j in range(count):
            block[j * r:(j + 1) * r, j * r:(j + 1) * r] += p[j] * st.R

        if k < N - 1:
            F, f = _children(st, tree.sigma, F, f, F_mean, f_mean, width, r, 0)
            logger.debug("Assembled tree stage %d (%d node(s))", k, count)
            continue

        leaf_p = tree.probabilities[N]
        leaf_F_mean = np.zeros((n, width))
        leaf_f_mean = np.zeros(n)
        for start in range(0, count, _NODE_CHUNK):
            part = slice(start, start + _NODE_CHUNK)
            F_leaf, f_leaf = _children(
                st, tree.sigma, F[part], f[part], F_mean, f_mean, width, r, start
            )
            weights = leaf_p[2 * start:2 * start + F_leaf.shape[0]]
            c += _add_expected(H, g, F_leaf, f_leaf, weights, spec.terminal_Q)
            leaf_F_mean += np.tensordot(weights, F_leaf, axes=1)
            leaf_f_mean += weights @ f_leaf
        c += _add_mean(H, g, leaf_F_mean, leaf_f_mean, spec.terminal_Qbar)
        logger.debug("Assembled tree stage %d and %d leaves", k, 2 * count)

    H = (H + H.T) / 2.0
    return QuadraticCost(H=_readonly(H), g=_readonly(g), c=c)


def check_controls(spec: ProblemSpec, tree: ScenarioTree, controls: TreeControl) -> None:
    """Raise ShapeMismatchError unless ``controls`` has one r-vector per tree node."""
    if controls.N != tree.depth or controls.r != spec.r:
        raise ShapeMismatchError(
            f"Controls cover {controls.N} stage(s) of dimension {controls.r}, "
            f"tree needs {tree.depth} of dimension {spec.r}"
        )


def tree_states(spec: ProblemSpec, tree: ScenarioTree, controls: TreeControl) -> List[np.ndarray]:
    """
    Node states under fixed adapted controls.

    Returns:
        List of N+1 arrays; entry k has shape (2**k, n).

    Raises:
        ShapeMismatchError: If the controls do not fit the tree.
    """
    check_controls(spec, tree, controls)
    states = [spec.x0[None, :].copy()]
    for k, st in enumerate(spec.stages):
        x = states[k]
        mean = tree.probabilities[k] @ x
        u = controls.controls[k]
        parents = _parents(2 * x.shape[0])
        w = tree.noise[k + 1][:, None]
        x_par, u_par = x[parents], u[parents]
        drift = x_par @ st.A.T + st.Abar @ mean + u_par @ st.B.T
        diffusion = x_par @ st.C.T + st.Cbar @ mean + u_par @ st.D.T
        states.append(drift + w * diffusion)
    return states


def feedback_controls(spec: ProblemSpec, sol: RiccatiSolution, tree: ScenarioTree) -> TreeControl:
    """Riccati feedback realised on the tree, using exact tree means for E x_k."""
    check_compatible(spec, sol)
    x = spec.x0[None, :].copy()
    blocks = []
    for k, st in enumerate(spec.stages):
        mean = tree.probabilities[k] @ x
        u = -(x - mean) @ sol.K[k].T - sol.Kbar[k] @ mean
        blocks.append(u)
        parents = _parents(2 * x.shape[0])
        w = tree.noise[k + 1][:, None]
        x_par, u_par = x[parents], u[parents]
        x = (x_par @ st.A.T + st.Abar @ mean + u_par @ st.B.T) + w * (
            x_par @ st.C.T + st.Cbar @ mean + u_par @ st.D.T
        )
    return TreeControl(controls=tuple(blocks))


def evaluate_tree_cost(spec: ProblemSpec, tree: ScenarioTree, controls: TreeControl) -> float:
    """Exact cost of fixed adapted controls by exhaustive probability weighting."""
    states = tree_states(spec, tree, controls)
    total = 0.0
    for k, st in enumerate(spec.stages):
        p = tree.probabilities[k]
        x, u = states[k], controls.controls[k]
        mean_x, mean_u = p @ x, p @ u
        total += float(p @ np.einsum("ja,ab,jb->j", x, st.Q, x))
        total += float(p @ np.einsum("ja,ab,jb->j", u, st.R, u))
        total += float(mean_x @ st.Qbar @ mean_x + mean_u @ st.Rbar @ mean_u)
    p = tree.probabilities[spec.N]
    x = states[spec.N]
    mean_x = p @ x
    total += float(p @ np.einsum("ja,ab,jb->j", x, spec.terminal_Q, x))
    total += float(mean_x @ spec.terminal_Qbar @ mean_x)
    return total


def solve_exact(
    spec: ProblemSpec,
    tree: ScenarioTree,
    cost: Optional[QuadraticCost] = None,
    start: Optional[np.ndarray] = None,
) -> Tuple[TreeControl, float]:
    """
    Minimize the tree cost over all adapted controls.

    Solves H u = -g by Cholesky and evaluates the optimum two ways,
    c + 2 g^T u + u^T H u and c + g^T u (= c - g^T H^{-1} g); they must agree.

    Args:
        spec: Problem the tree was built from.
        tree: Scenario tree.
        cost: Pre-assembled cost; assembled here when omitted.
        start: Stacked controls to refine from; zero when omitted.

    Returns:
        Tuple of the optimal controls and the optimal value.

    Raises:
        ShapeMismatchError: If ``start`` is not a vector of length r * (2**N - 1).
        SingularHessianError: If H is not positive definite.
        OracleConsistencyError: If the two value formulas disagree.
    """
    cost = cost or assemble_cost(spec, tree)
    try:
        factor = cho_factor(cost.H, lower=True)
    except LinAlgError as exc:
        raise SingularHessianError() from exc
    if start is None:
        u = np.zeros(cost.dimension)
    else:
        u = np.array(start, dtype=float)
        if u.shape != (cost.dimension,):
            raise ShapeMismatchError(
                f"Starting point has shape {u.shape}, expected ({cost.dimension},)"
            )
    # Two Newton steps: the first is exact up to rounding, the second leaves
    # H u + g at rounding level of |H| |u| + |g|.
    for _ in range(2):
        u = u + cho_solve(factor, -(cost.H @ u + cost.g))

    linear = float(cost.g @ u)
    quadratic = float(u @ cost.H @ u)
    direct = cost.c + 2.0 * linear + quadratic
    reduced = cost.c + linear
    magnitude = np.abs(u)
    scale = max(
        1.0,
        abs(cost.c),
        float(np.abs(cost.g) @ magnitude),
        float(magnitude @ np.abs(cost.H) @ magnitude),
    )
    if abs(direct - reduced) > ORACLE_FORMULA_RTOL * scale:
        raise OracleConsistencyError(direct, reduced)
    return TreeControl.from_vector(u, spec.r, spec.N), direct


def compare(
    spec: ProblemSpec,
    sol: RiccatiSolution,
    tree: ScenarioTree,
    cost: Optional[QuadraticCost] = None,
) -> ComparisonReport:
    """
    Compare a Riccati solution with the exact tree optimum.

    ``control_gap`` measures the tree-optimal controls against
    -K_k (x - E x_k) - Kbar_k E x_k at the optimal node states. ``policy_gap``
    is the tree cost of the solution's own feedback minus the optimum.

    Raises:
        DimensionMismatchError: If the solution does not fit the problem.
    """
    check_compatible(spec, sol)
    cost = cost or assemble_cost(spec, tree)
    optimal, value_tree = solve_exact(spec, tree, cost)

    control_gap = 0.0
    for k, x in enumerate(tree_states(spec, tree, optimal)[: spec.N]):
        mean = tree.probabilities[k] @ x
        predicted = -(x - mean) @ sol.K[k].T - sol.Kbar[k] @ mean
        control_gap = max(control_gap, float(np.max(np.abs(optimal.controls[k] - predicted))))

    policy_value = cost.evaluate(feedback_controls(spec, sol, tree).stack())
    value_riccati = optimal_value(sol, spec.x0)
    value_gap = abs(value_tree - value_riccati)
    policy_gap = policy_value - value_tree
    scale = max(1.0, abs(value_tree))
    passed = (
        value_gap <= ORACLE_VALUE_RTOL * scale
        and control_gap <= ORACLE_CONTROL_ATOL
        and policy_gap <= ORACLE_VALUE_RTOL * scale
    )
    logger.info(
        "Oracle %s: value_gap=%.3g control_gap=%.3g policy_gap=%.3g",
        "passed" if passed else "failed",
        value_gap,
        control_gap,
        policy_gap,
    )
    return ComparisonReport(
        value_riccati=value_riccati,
        value_tree=value_tree,
        value_gap=value_gap,
        control_gap=control_gap,
        policy_gap=policy_gap,
        passed=passed,
    )


def write_tree_csv(
    path: PathLike, spec: ProblemSpec, tree: ScenarioTree, controls: TreeControl
) -> None:
    """Dump ``stage,node,probability,state...,control...``; leaves have no control."""
    states = tree_states(spec, tree, controls)
    header = ["stage", "node", "probability"]
    header += [f"x_{i}" for i in range(spec.n)] + [f"u_{i}" for i in range(spec.r)]
    rows = []
    for k, x in enumerate(states):
        for j in range(x.shape[0]):
            row = [k, j, float(tree.probabilities[k][j])] + [float(v) for v in x[j]]
            if k < spec.N:
                row += [float(v) for v in controls.controls[k][j]]
            else:
                row += [""] * spec.r
            rows.append(row)
    write_csv(path, header, rows)
