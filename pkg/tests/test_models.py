"""
Tests for Pydantic models.
"""

import numpy as np
import pytest
from pydantic import ValidationError

from mfdlq.exceptions import (
    DimensionMismatchError,
    InvalidProblemError,
    ProblemFormatError,
    ShapeMismatchError,
)
from mfdlq.models import (
    AdjointCertificate,
    ComparisonReport,
    NoiseKind,
    NoiseModel,
    Policy,
    PolicyKind,
    ProblemSpec,
    QuadraticCost,
    RiccatiSolution,
    StageData,
    TreeControl,
    ValidationReport,
    Violation,
)


def _stage(n: int = 2, r: int = 1, **overrides):
    data = {"A": np.eye(n), "B": np.ones((n, r)), "Q": np.eye(n), "R": np.eye(r)}
    data.update(overrides)
    return StageData(**data)


class TestNoiseModel:
    """Test noise model validation."""

    def test_defaults(self):
        noise = NoiseModel(kind="gaussian")
        assert noise.kind is NoiseKind.GAUSSIAN
        assert noise.variance == 1.0
        assert noise.std == 1.0

    def test_std(self):
        assert NoiseModel(kind="rademacher", variance=4.0).std == pytest.approx(2.0)

    @pytest.mark.parametrize("variance", [0.0, -1.0])
    def test_variance_must_be_positive(self, variance):
        with pytest.raises(ValidationError):
            NoiseModel(kind="gaussian", variance=variance)

    def test_unknown_kind(self):
        with pytest.raises(ValidationError):
            NoiseModel(kind="uniform")


class TestStageData:
    """Test stage coefficient handling."""

    def test_optional_matrices_default_to_zero(self):
        stage = _stage(n=2, r=3)

        assert stage.n == 2
        assert stage.r == 3
        assert stage.Abar.shape == (2, 2) and not np.any(stage.Abar)
        assert stage.C.shape == (2, 2) and not np.any(stage.C)
        assert stage.D.shape == (2, 3) and not np.any(stage.D)
        assert stage.Qbar.shape == (2, 2) and not np.any(stage.Qbar)
        assert stage.Rbar.shape == (3, 3) and not np.any(stage.Rbar)
        assert stage.barred_fields() == []

    def test_weights_are_symmetrized(self):
        stage = _stage(Q=[[1.0, 2.0], [0.0, 1.0]])
        np.testing.assert_array_equal(stage.Q, [[1.0, 1.0], [1.0, 1.0]])

    def test_arrays_are_read_only(self):
        stage = _stage()
        with pytest.raises(ValueError):
            stage.A[0, 0] = 5.0

    def test_input_is_copied(self):
        A = np.eye(2)
        stage = _stage(A=A)
        A[0, 0] = 7.0
        assert stage.A[0, 0] == 1.0

    def test_non_square_weight(self):
        with pytest.raises(DimensionMismatchError) as exc_info:
            _stage(Q=np.ones((2, 3)))
        assert exc_info.value.field == "Q"

    def test_non_finite_entry(self):
        with pytest.raises(ProblemFormatError):
            _stage(A=[[1.0, np.nan], [0.0, 1.0]])

    def test_ragged_matrix(self):
        with pytest.raises(ProblemFormatError):
            _stage(A=[[1.0, 0.0], [1.0]])

    def test_barred_fields(self):
        stage = _stage(Abar=np.eye(2), Rbar=[[0.5]])
        assert stage.barred_fields() == ["Abar", "Rbar"]


class TestProblemSpec:
    """Test problem-level dimension checks."""

    def _spec(self, **overrides):
        data = {
            "n": 2,
            "r": 1,
            "N": 2,
            "stages": (_stage(), _stage()),
            "terminal_Q": np.eye(2),
            "x0": [1.0, 0.0],
            "noise": NoiseModel(kind="rademacher"),
        }
        data.update(overrides)
        return ProblemSpec(**data)

    def test_valid(self):
        spec = self._spec()
        assert spec.terminal_Qbar.shape == (2, 2)
        assert not spec.has_meanfield
        assert spec.barred_fields() == []

    def test_stage_count_must_match_horizon(self):
        with pytest.raises(DimensionMismatchError) as exc_info:
            self._spec(N=3)
        assert exc_info.value.field == "stages"

    def test_stage_matrix_shape(self):
        with pytest.raises(DimensionMismatchError) as exc_info:
            self._spec(stages=(_stage(), _stage(r=2)))
        assert exc_info.value.field == "stages[1].B"
        assert exc_info.value.expected == (2, 1)

    def test_initial_state_shape(self):
        with pytest.raises(DimensionMismatchError):
            self._spec(x0=[1.0, 0.0, 0.0])

    def test_barred_fields_are_stage_qualified(self):
        spec = self._spec(stages=(_stage(), _stage(Cbar=np.eye(2))), terminal_Qbar=np.eye(2))
        assert spec.barred_fields() == ["stages[1].Cbar", "terminal_Qbar"]
        assert spec.has_meanfield


class TestValidationReport:
    """Test the ok-iff-no-violations invariant."""

    def test_from_violations(self):
        violation = Violation(location="R_0", description="R_0 not positive definite", value=0.0)

        assert ValidationReport.from_violations([]).ok is True
        assert ValidationReport.from_violations([violation]).ok is False

    def test_inconsistent_report_rejected(self):
        with pytest.raises(ValidationError):
            ValidationReport(ok=True, violations=[Violation(location="Q_0", description="bad")])

    def test_to_document(self):
        violation = Violation(location="Q_0", description="Q_0 bad", value=-0.5)
        document = ValidationReport.from_violations([violation]).to_document()
        assert document == {
            "ok": False,
            "violations": [{"location": "Q_0", "description": "Q_0 bad", "value": -0.5}],
        }


class TestRiccatiSolution:
    """Test solution shape checks."""

    def test_properties(self):
        sol = RiccatiSolution(
            P=np.zeros((3, 2, 2)),
            Pi=np.ones((3, 2, 2)),
            K=np.zeros((2, 1, 2)),
            Kbar=np.zeros((2, 1, 2)),
        )
        assert (sol.N, sol.n, sol.r) == (2, 2, 1)
        np.testing.assert_array_equal(sol.value_matrix, np.ones((2, 2)))

    def test_sequence_lengths_must_agree(self):
        with pytest.raises(DimensionMismatchError) as exc_info:
            RiccatiSolution(
                P=np.zeros((2, 2, 2)),
                Pi=np.zeros((3, 2, 2)),
                K=np.zeros((2, 1, 2)),
                Kbar=np.zeros((2, 1, 2)),
            )
        assert exc_info.value.field == "P"


class TestPolicy:
    """Test policy construction."""

    def test_zero(self):
        assert Policy.zero().kind is PolicyKind.ZERO

    def test_open_loop(self):
        policy = Policy.open_loop([[1.0], [2.0]])
        assert policy.controls.shape == (2, 1)

    def test_riccati_requires_solution(self):
        with pytest.raises(InvalidProblemError):
            Policy(kind=PolicyKind.RICCATI)

    def test_open_loop_requires_controls(self):
        with pytest.raises(InvalidProblemError):
            Policy(kind="open_loop")


class TestTreeControl:
    """Test adapted control layout."""

    def test_stack_and_from_vector(self):
        vector = np.arange(7.0)
        controls = TreeControl.from_vector(vector, r=1, N=3)

        assert controls.N == 3
        assert controls.r == 1
        np.testing.assert_array_equal(controls.controls[2].ravel(), [3.0, 4.0, 5.0, 6.0])
        np.testing.assert_array_equal(controls.stack(), vector)

    def test_wrong_vector_length(self):
        with pytest.raises(ShapeMismatchError):
            TreeControl.from_vector(np.zeros(5), r=1, N=3)

    def test_wrong_node_count(self):
        with pytest.raises(ShapeMismatchError):
            TreeControl(controls=(np.zeros((1, 2)), np.zeros((3, 2))))


class TestQuadraticCost:
    """Test quadratic cost evaluation."""

    def test_evaluate_and_gradient(self):
        cost = QuadraticCost(H=np.array([[3.0]]), g=np.array([2.0]), c=3.0)

        assert cost.dimension == 1
        assert cost.evaluate(np.array([-2.0 / 3.0])) == pytest.approx(5.0 / 3.0)
        np.testing.assert_allclose(cost.gradient(np.array([1.0])), [10.0])


class TestReports:
    """Test report documents."""

    def test_comparison_document_uses_pass_key(self):
        report = ComparisonReport(
            value_riccati=1.5,
            value_tree=1.5,
            value_gap=0.0,
            control_gap=0.0,
            policy_gap=0.0,
            passed=True,
        )
        document = report.to_document()
        assert list(document) == [
            "value_riccati",
            "value_tree",
            "value_gap",
            "control_gap",
            "policy_gap",
            "pass",
        ]
        assert document["pass"] is True

    def test_certificate_document(self):
        certificate = AdjointCertificate(
            adjoint={1: np.zeros((2, 1))},
            residuals={0: np.array([[0.25]])},
            max_residual=0.25,
        )
        assert certificate.stage_max_residuals == [0.25]
        assert "nodes" not in certificate.to_document()
        nodes = certificate.to_document(verbose=True)["nodes"]
        assert nodes["residuals"]["0"] is certificate.residuals[0]
