"""
Pytest configuration and shared fixtures.
"""

import json
from pathlib import Path
from typing import Any, Callable, Dict

import numpy as np
import pytest

from mfdlq.models import ProblemSpec, StageData
from mfdlq.problem import load_problem


def scalar_document(**stage: float) -> Dict[str, Any]:
    """One-stage scalar problem document; ``stage`` gives the stage entries."""
    terminal_Q = stage.pop("terminal_Q", 1.0)
    return {
        "n": 1,
        "r": 1,
        "N": 1,
        "x0": [1.0],
        "noise": {"kind": "rademacher", "variance": 1.0},
        "terminal": {"Q": [[terminal_Q]]},
        "stages": [{name: [[value]] for name, value in stage.items()}],
    }


def scale_weights(spec: ProblemSpec, factor: float) -> ProblemSpec:
    """Copy of ``spec`` with every weight matrix multiplied by ``factor``."""
    stages = tuple(
        StageData(
            **{
                **{name: getattr(st, name) for name in ("A", "Abar", "B", "C", "Cbar", "D")},
                "Q": factor * st.Q,
                "Qbar": factor * st.Qbar,
                "R": factor * st.R,
                "Rbar": factor * st.Rbar,
            }
        )
        for st in spec.stages
    )
    return ProblemSpec(
        n=spec.n,
        r=spec.r,
        N=spec.N,
        stages=stages,
        terminal_Q=factor * spec.terminal_Q,
        terminal_Qbar=factor * spec.terminal_Qbar,
        x0=spec.x0,
        noise=spec.noise,
    )


@pytest.fixture
def e1_document():
    """Deterministic scalar problem: J(u) = 1 + u^2 + (1 + u)^2."""
    return scalar_document(A=1.0, B=1.0, Q=1.0, R=1.0)


@pytest.fixture
def e2_document():
    """Scalar problem with unit diffusion: J(u) = 3u^2 + 4u + 3."""
    return scalar_document(A=1.0, B=1.0, C=1.0, D=1.0, Q=1.0, R=1.0)


@pytest.fixture
def e3_document():
    """Scalar mean-field problem with Abar = Qbar = 1 and no diffusion."""
    return scalar_document(A=1.0, Abar=1.0, B=1.0, Q=1.0, Qbar=1.0, R=1.0)


@pytest.fixture
def e1(e1_document) -> ProblemSpec:
    return load_problem(json.dumps(e1_document))


@pytest.fixture
def e2(e2_document) -> ProblemSpec:
    return load_problem(json.dumps(e2_document))


@pytest.fixture
def e3(e3_document) -> ProblemSpec:
    return load_problem(json.dumps(e3_document))


@pytest.fixture
def problem_file(tmp_path) -> Callable[..., Path]:
    """Write a problem document to a temporary JSON file and return its path."""

    def _write(document: Dict[str, Any], name: str = "problem.json") -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(document), encoding="utf-8")
        return path

    return _write


@pytest.fixture
def rng():
    """Seeded generator for test perturbations."""
    return np.random.default_rng(12345)


@pytest.fixture
def make_scalar() -> Callable[..., Dict[str, Any]]:
    """Factory for one-stage scalar problem documents."""
    return scalar_document


@pytest.fixture
def scaled() -> Callable[[ProblemSpec, float], ProblemSpec]:
    """Factory scaling every weight of a problem."""
    return scale_weights
