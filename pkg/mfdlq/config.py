"""
Runtime settings and numeric tolerances.
"""

import logging
import os
from typing import Mapping, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

logger = logging.getLogger(__name__)

THREADS_ENV = "MFDLQ_THREADS"

# Minimum-eigenvalue thresholds for assumption (J).
PSD_TOLERANCE = 1e-10
PD_TOLERANCE = 1e-12
SYMMETRY_TOLERANCE = 1e-12

DEFAULT_MAX_DECISION_DIM = 4096
DEFAULT_BLOCK_SIZE = 1024

ORACLE_VALUE_RTOL = 1e-8
ORACLE_CONTROL_ATOL = 1e-7
ORACLE_FORMULA_RTOL = 1e-12
STATIONARITY_TOLERANCE = 1e-9


def seed_sequence(seed: int, spawn_key: Tuple[int, ...] = ()) -> np.random.SeedSequence:
    """
    SeedSequence for any integer seed.

    Non-negative seeds map to ``SeedSequence(seed, spawn_key)``. A negative
    seed uses its magnitude with one extra trailing key, so ``-s`` and ``s``
    give different streams.
    """
    if seed < 0:
        return np.random.SeedSequence(entropy=-seed, spawn_key=tuple(spawn_key) + (1,))
    return np.random.SeedSequence(entropy=seed, spawn_key=tuple(spawn_key))


class Settings(BaseModel):
    """Process-level knobs for the solvers and the simulator."""

    threads: int = Field(default=0, ge=0, description="Worker threads (0 = one per CPU)")
    max_decision_dim: int = Field(
        default=DEFAULT_MAX_DECISION_DIM,
        ge=1,
        description="Largest stacked control dimension the tree oracle accepts",
    )
    block_size: int = Field(
        default=DEFAULT_BLOCK_SIZE,
        ge=1,
        description="Monte-Carlo paths per random stream block",
    )

    model_config = ConfigDict(extra="forbid", frozen=True)

    @classmethod
    def from_env(cls, environ: Optional[Mapping[str, str]] = None) -> "Settings":
        """
        Build settings from the environment.

        Args:
            environ: Mapping to read instead of ``os.environ``.

        Returns:
            Settings: Settings with ``threads`` taken from ``MFDLQ_THREADS``.
        """
        env = os.environ if environ is None else environ
        raw = env.get(THREADS_ENV, "").strip()
        threads = 0
        if raw:
            try:
                threads = int(raw)
            except ValueError:
                logger.warning("Ignoring non-integer %s=%r", THREADS_ENV, raw)
            if threads < 0:
                logger.warning("Ignoring negative %s=%r", THREADS_ENV, raw)
                threads = 0
        return cls(threads=threads)

    def worker_count(self) -> int:
        """Resolve ``threads`` to a concrete worker count."""
        if self.threads > 0:
            return self.threads
        return max(1, os.cpu_count() or 1)
