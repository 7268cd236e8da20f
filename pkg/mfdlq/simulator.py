"""
Forward Monte-Carlo simulation of the controlled mean-field system.

Paths are grouped into fixed-size blocks; block b draws from the stream
SeedSequence(seed, spawn_key=(b,)), so a report depends only on
(seed, num_paths, block_size) and never on how many threads ran the blocks.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, Optional, Tuple

import numpy as np

from .config import Settings, seed_sequence
from .exceptions import DimensionMismatchError, SimulationError
from .models import (
    NoiseKind,
    NoiseModel,
    Policy,
    PolicyKind,
    ProblemSpec,
    RiccatiSolution,
    SimulationReport,
)
from .riccati import check_compatible
from .serialization import PathLike, write_csv

logger = logging.getLogger(__name__)

MEAN_ESTIMATORS = ("analytic", "sample")


def draw_noise(noise: NoiseModel, rng: np.random.Generator, size: Tuple[int, ...]) -> np.ndarray:
    """
    Draw i.i.d. noise: N(0, sigma^2), or +sigma / -sigma with probability 1/2 each.
    """
    if noise.kind is NoiseKind.GAUSSIAN:
        return rng.normal(0.0, noise.std, size=size)
    signs = 2 * rng.integers(0, 2, size=size) - 1
    return noise.std * signs.astype(float)


def noise_moments(noise: NoiseModel, num_draws: int, seed: int) -> Dict[str, float]:
    """Empirical mean, second and fourth moment of ``num_draws`` draws."""
    rng = np.random.default_rng(seed_sequence(seed))
    w = draw_noise(noise, rng, (num_draws,))
    return {
        "mean": float(np.mean(w)),
        "second": float(np.mean(w**2)),
        "fourth": float(np.mean(w**4)),
    }


def _check_policy(spec: ProblemSpec, policy: Policy) -> None:
    if policy.kind is PolicyKind.RICCATI:
        assert policy.solution is not None
        check_compatible(spec, policy.solution)
    elif policy.kind is PolicyKind.OPEN_LOOP:
        assert policy.controls is not None
        if policy.controls.shape != (spec.N, spec.r):
            raise DimensionMismatchError("controls", (spec.N, spec.r), policy.controls.shape)


def mean_trajectory(spec: ProblemSpec, policy: Policy) -> Tuple[np.ndarray, np.ndarray]:
    """
    Exact means under ``policy``.

    Returns:
        Tuple of z with shape (N+1, n), z_k = E x_k, and ubar with shape
        (N, r), ubar_k = E u_k.
    """
    _check_policy(spec, policy)
    z = np.empty((spec.N + 1, spec.n))
    ubar = np.zeros((spec.N, spec.r))
    z[0] = spec.x0
    for k, st in enumerate(spec.stages):
        if policy.kind is PolicyKind.RICCATI:
            assert policy.solution is not None
            ubar[k] = -policy.solution.Kbar[k] @ z[k]
        elif policy.kind is PolicyKind.OPEN_LOOP:
            assert policy.controls is not None
            ubar[k] = policy.controls[k]
        z[k + 1] = (st.A + st.Abar) @ z[k] + st.B @ ubar[k]
    return z, ubar


def propagate_mean(spec: ProblemSpec, sol: RiccatiSolution) -> np.ndarray:
    """E x_k for k = 0..N under Riccati feedback: z_{k+1} = (A + Abar) z_k - B Kbar_k z_k."""
    return mean_trajectory(spec, Policy.riccati(sol))[0]


def _simulate_block(
    spec: ProblemSpec,
    policy: Policy,
    z: np.ndarray,
    seed: int,
    block: int,
    size: int,
) -> Tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed_sequence(seed, (block,)))
    w = draw_noise(spec.noise, rng, (size, spec.N))

    states = np.empty((size, spec.N + 1, spec.n))
    controls = np.zeros((size, spec.N, spec.r))
    x = np.tile(spec.x0, (size, 1))
    states[:, 0] = x
    for k, st in enumerate(spec.stages):
        if policy.kind is PolicyKind.RICCATI:
            assert policy.solution is not None
            K, Kbar = policy.solution.K[k], policy.solution.Kbar[k]
            u = -(x - z[k]) @ K.T - Kbar @ z[k]
        elif policy.kind is PolicyKind.OPEN_LOOP:
            assert policy.controls is not None
            u = np.tile(policy.controls[k], (size, 1))
        else:
            u = np.zeros((size, spec.r))
        drift = x @ st.A.T + st.Abar @ z[k] + u @ st.B.T
        diffusion = x @ st.C.T + st.Cbar @ z[k] + u @ st.D.T
        x = drift + w[:, k:k + 1] * diffusion
        states[:, k + 1] = x
        controls[:, k] = u
    return states, controls


def _quadratic(vectors: np.ndarray, weight: np.ndarray) -> np.ndarray:
    return np.einsum("pi,ij,pj->p", vectors, weight, vectors)


def simulate(
    spec: ProblemSpec,
    policy: Policy,
    num_paths: int,
    seed: int,
    mean_estimator: str = "analytic",
    settings: Optional[Settings] = None,
) -> SimulationReport:
    """
    Simulate ``num_paths`` independent paths and estimate the cost.

    Every path uses the exact dynamics with E x_k replaced by its analytic
    value z_k, and Riccati feedback u_k = -K_k (x_k - z_k) - Kbar_k z_k.
    Mean-field cost terms use z_k and ubar_k as well, so each path cost is an
    unbiased sample of J(u). With ``mean_estimator="sample"`` those terms use
    ensemble averages instead; that estimator is biased at finite size.

    Args:
        spec: Problem to simulate.
        policy: Control policy.
        num_paths: Number of paths (at least 1).
        seed: Master seed, any integer.
        mean_estimator: ``"analytic"`` or ``"sample"``.
        settings: Thread count and block size; defaults to the environment.

    Returns:
        SimulationReport: Per-path costs, their mean and standard error, and
        empirical and analytic mean traces.

    Raises:
        SimulationError: If num_paths < 1 or the estimator is unknown.
        DimensionMismatchError: If the policy does not fit the problem.
    """
    if num_paths < 1:
        raise SimulationError(f"num_paths must be at least 1, got {num_paths}")
    if mean_estimator not in MEAN_ESTIMATORS:
        raise SimulationError(f"Unknown mean estimator {mean_estimator!r}")
    settings = settings or Settings.from_env()
    z, ubar = mean_trajectory(spec, policy)

    block_size = settings.block_size
    num_blocks = math.ceil(num_paths / block_size)
    sizes = [min(block_size, num_paths - b * block_size) for b in range(num_blocks)]
    workers = min(settings.worker_count(), num_blocks)
    logger.debug(
        "Simulating %d path(s) in %d block(s) on %d worker(s)", num_paths, num_blocks, workers
    )

    def run(block: int) -> Tuple[np.ndarray, np.ndarray]:
        return _simulate_block(spec, policy, z, seed, block, sizes[block])

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, range(num_blocks)))
    else:
        results = [run(block) for block in range(num_blocks)]
    states = np.concatenate([s for s, _ in results])
    controls = np.concatenate([u for _, u in results])

    empirical_mean = states.mean(axis=0)
    if mean_estimator == "sample":
        z_cost, ubar_cost = empirical_mean, controls.mean(axis=0)
    else:
        z_cost, ubar_cost = z, ubar

    costs = _quadratic(states[:, spec.N], spec.terminal_Q)
    meanfield = float(z_cost[spec.N] @ spec.terminal_Qbar @ z_cost[spec.N])
    for k, st in enumerate(spec.stages):
        costs = costs + _quadratic(states[:, k], st.Q) + _quadratic(controls[:, k], st.R)
        meanfield += float(z_cost[k] @ st.Qbar @ z_cost[k] + ubar_cost[k] @ st.Rbar @ ubar_cost[k])
    costs = costs + meanfield
    costs.setflags(write=False)

    std_error = float(np.std(costs, ddof=1) / math.sqrt(num_paths)) if num_paths > 1 else 0.0
    report = SimulationReport(
        num_paths=num_paths,
        seed=seed,
        policy=policy.kind,
        noise=spec.noise,
        mean_estimator=mean_estimator,
        per_path_cost=costs,
        mean_cost=float(np.mean(costs)),
        std_error=std_error,
        state_mean_trace=empirical_mean,
        analytic_mean_trace=z,
    )
    logger.info(
        "Simulated %d path(s): mean cost %.6g +/- %.2g", num_paths, report.mean_cost, std_error
    )
    return report


def write_cost_csv(path: PathLike, report: SimulationReport) -> None:
    """Write per-path costs as CSV with header ``path,cost``."""
    write_csv(path, ["path", "cost"], ((i, float(c)) for i, c in enumerate(report.per_path_cost)))


def write_trace_csv(path: PathLike, trace: np.ndarray) -> None:
    """Write a mean trace as CSV with header ``k,comp_0,...,comp_{n-1}``."""
    header = ["k"] + [f"comp_{i}" for i in range(trace.shape[1])]
    write_csv(path, header, ([k] + [float(v) for v in row] for k, row in enumerate(trace)))
