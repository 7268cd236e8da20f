"""
mfdlq

Finite-horizon mean-field discrete-time stochastic LQ control: Riccati
synthesis, Monte-Carlo simulation and an exact scenario-tree oracle.
"""

__version__ = "0.1.0"

from .adjoint import certify, compute_adjoint, stationarity_residual
from .exceptions import (
    MFDLQError,
    ProblemFormatError,
    MissingFieldError,
    DimensionMismatchError,
    InvalidProblemError,
    NonZeroMeanFieldError,
    SingularDenominatorError,
    StageOutOfRangeError,
    TreeTooLargeError,
    WrongNoiseKindError,
    SingularHessianError,
    OracleConsistencyError,
    ShapeMismatchError,
    SimulationError,
)
from .models import (
    NoiseKind,
    NoiseModel,
    StageData,
    ProblemSpec,
    ValidationReport,
    RiccatiSolution,
    PolicyKind,
    Policy,
    SimulationReport,
    ScenarioTree,
    TreeControl,
    QuadraticCost,
    ComparisonReport,
    AdjointCertificate,
)
from .problem import dump_problem, generate_random, load_problem, validate
from .riccati import feedback, optimal_value, solve, solve_classical, solve_meanfield
from .simulator import propagate_mean, simulate
from .tree import assemble_cost, build_tree, compare, solve_exact

__all__ = [
    # Operations
    "load_problem",
    "dump_problem",
    "validate",
    "generate_random",
    "solve",
    "solve_classical",
    "solve_meanfield",
    "feedback",
    "optimal_value",
    "propagate_mean",
    "simulate",
    "build_tree",
    "assemble_cost",
    "solve_exact",
    "compare",
    "compute_adjoint",
    "stationarity_residual",
    "certify",
    # Exceptions
    "MFDLQError",
    "ProblemFormatError",
    "MissingFieldError",
    "DimensionMismatchError",
    "InvalidProblemError",
    "NonZeroMeanFieldError",
    "SingularDenominatorError",
    "StageOutOfRangeError",
    "TreeTooLargeError",
    "WrongNoiseKindError",
    "SingularHessianError",
    "OracleConsistencyError",
    "ShapeMismatchError",
    "SimulationError",
    # Models
    "NoiseKind",
    "NoiseModel",
    "StageData",
    "ProblemSpec",
    "ValidationReport",
    "RiccatiSolution",
    "PolicyKind",
    "Policy",
    "SimulationReport",
    "ScenarioTree",
    "TreeControl",
    "QuadraticCost",
    "ComparisonReport",
    "AdjointCertificate",
]
