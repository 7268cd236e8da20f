"""
Tests for the adjoint recursion and stationarity residuals.
"""

import json

import numpy as np
import pytest

from mfdlq.adjoint import certify, compute_adjoint, stationarity_residual
from mfdlq.exceptions import ShapeMismatchError
from mfdlq.models import TreeControl
from mfdlq.problem import generate_random, load_problem
from mfdlq.riccati import solve_meanfield
from mfdlq.tree import assemble_cost, build_tree, feedback_controls, solve_exact, tree_states


def _perturbed(controls: TreeControl, delta: np.ndarray) -> TreeControl:
    return TreeControl.from_vector(controls.stack() + delta, controls.r, controls.N)


def _reference_adjoint(spec, tree, controls):
    """Node-by-node two-step recursion written with explicit loops."""
    states = tree_states(spec, tree, controls)
    N = spec.N
    mean = [tree.probabilities[k] @ states[k] for k in range(N + 1)]
    p = {N: [-spec.terminal_Q @ x - spec.terminal_Qbar @ mean[N] for x in states[N]]}
    for k in range(N - 1, 0, -1):
        st = spec.stages[k]
        children = p[k + 1]
        noise = tree.noise[k + 1]
        weights = tree.probabilities[k + 1]
        mean_p = sum(weights[c] * children[c] for c in range(len(children)))
        mean_pw = sum(weights[c] * noise[c] * children[c] for c in range(len(children)))
        values = []
        for j, x in enumerate(states[k]):
            left, right = 2 * j, 2 * j + 1
            cond_p = 0.5 * children[left] + 0.5 * children[right]
            cond_pw = 0.5 * noise[left] * children[left] + 0.5 * noise[right] * children[right]
            values.append(
                st.A.T @ cond_p
                + st.Abar.T @ mean_p
                + st.C.T @ cond_pw
                + st.Cbar.T @ mean_pw
                - st.Q @ x
                - st.Qbar @ mean[k]
            )
        p[k] = values
    return {k: np.array(v) for k, v in p.items()}


class TestComputeAdjoint:
    """Test the backward adjoint recursion."""

    def test_zero_weights_give_zero_adjoint(self, make_scalar, rng):
        spec = load_problem(
            json.dumps(make_scalar(A=1.0, Abar=0.5, B=1.0, C=1.0, Q=0.0, R=1.0, terminal_Q=0.0))
        )
        tree = build_tree(spec)
        controls = TreeControl.from_vector(rng.normal(size=1), 1, 1)

        adjoint = compute_adjoint(spec, tree, controls)
        assert list(adjoint) == [1]
        np.testing.assert_array_equal(adjoint[1], 0.0)

    def test_terminal_condition(self, e2):
        tree = build_tree(e2)
        controls = TreeControl(controls=(np.array([[-2.0 / 3.0]]),))
        adjoint = compute_adjoint(e2, tree, controls)
        states = tree_states(e2, tree, controls)

        np.testing.assert_array_equal(adjoint[1], -states[1])

    def test_matches_loop_recursion(self, rng):
        spec = generate_random(2, 1, 2, seed=0, meanfield=True)
        tree = build_tree(spec)
        controls = TreeControl.from_vector(
            rng.normal(size=tree.decision_dim(spec.r)), spec.r, spec.N
        )

        adjoint = compute_adjoint(spec, tree, controls)
        reference = _reference_adjoint(spec, tree, controls)
        assert sorted(adjoint) == [1, 2]
        for k in (1, 2):
            np.testing.assert_allclose(adjoint[k], reference[k], rtol=1e-13, atol=1e-13)


class TestStationarityResidual:
    """Test Hamiltonian stationarity."""

    def test_feedback_on_unit_diffusion_scalar(self, e2):
        certificate = certify(e2, solve_meanfield(e2), build_tree(e2))
        assert certificate.max_residual <= 1e-12

    def test_perturbed_root_control(self, e2):
        tree = build_tree(e2)
        controls = _perturbed(feedback_controls(e2, solve_meanfield(e2), tree), np.array([0.1]))
        certificate = stationarity_residual(e2, tree, controls, compute_adjoint(e2, tree, controls))

        assert certificate.max_residual >= 0.05
        assert certificate.max_residual == pytest.approx(0.3)

    def test_scaled_control_weight(self, e2):
        spec = e2.model_copy(
            update={"stages": tuple(st.model_copy(update={"R": 10.0 * st.R}) for st in e2.stages)}
        )
        assert certify(spec, solve_meanfield(spec), build_tree(spec)).max_residual <= 1e-9

    def test_scaled_weights_stay_stationary(self, scaled):
        spec = scaled(generate_random(2, 2, 3, seed=2, meanfield=True), 100.0)
        assert certify(spec, solve_meanfield(spec), build_tree(spec)).max_residual <= 1e-9

    @pytest.mark.parametrize("seed", range(4))
    def test_residual_is_scaled_gradient(self, seed, rng):
        spec = generate_random(1 + seed % 2, 1 + seed // 2, 3, seed=seed, meanfield=True)
        tree = build_tree(spec)
        cost = assemble_cost(spec, tree)
        u = rng.normal(size=cost.dimension)
        controls = TreeControl.from_vector(u, spec.r, spec.N)
        certificate = stationarity_residual(
            spec, tree, controls, compute_adjoint(spec, tree, controls)
        )

        gradient = TreeControl.from_vector(cost.gradient(u), spec.r, spec.N)
        for k in range(spec.N):
            expected = -0.5 * gradient.controls[k] / tree.probabilities[k][:, None]
            np.testing.assert_allclose(certificate.residuals[k], expected, rtol=1e-9, atol=1e-9)

    def test_matches_finite_differences(self, rng):
        spec = generate_random(2, 1, 2, seed=5, meanfield=True)
        tree = build_tree(spec)
        cost = assemble_cost(spec, tree)
        u = rng.normal(size=cost.dimension)
        controls = TreeControl.from_vector(u, spec.r, spec.N)
        certificate = stationarity_residual(
            spec, tree, controls, compute_adjoint(spec, tree, controls)
        )

        step = 1e-6
        residual = np.concatenate([certificate.residuals[k].ravel() for k in range(spec.N)])
        weights = np.concatenate([np.repeat(tree.probabilities[k], spec.r) for k in range(spec.N)])
        for i in range(cost.dimension):
            e = np.zeros(cost.dimension)
            e[i] = step
            derivative = (cost.evaluate(u + e) - cost.evaluate(u - e)) / (2 * step)
            assert residual[i] == pytest.approx(-0.5 * derivative / weights[i], abs=1e-6)

    def test_residual_is_affine(self, rng):
        spec = generate_random(2, 2, 2, seed=7, meanfield=True)
        tree = build_tree(spec)
        optimal, _ = solve_exact(spec, tree)
        delta = rng.normal(size=tree.decision_dim(spec.r))

        def residuals(controls):
            certificate = stationarity_residual(
                spec, tree, controls, compute_adjoint(spec, tree, controls)
            )
            return np.concatenate([certificate.residuals[k].ravel() for k in range(spec.N)])

        base = residuals(optimal)
        once = residuals(_perturbed(optimal, delta)) - base
        twice = residuals(_perturbed(optimal, 2 * delta)) - base
        np.testing.assert_allclose(twice, 2 * once, atol=1e-10)

    def test_missing_adjoint_stage(self, e2):
        tree = build_tree(e2)
        controls = TreeControl(controls=(np.zeros((1, 1)),))
        with pytest.raises(ShapeMismatchError):
            stationarity_residual(e2, tree, controls, {})

    def test_wrong_adjoint_shape(self, e2):
        tree = build_tree(e2)
        controls = TreeControl(controls=(np.zeros((1, 1)),))
        with pytest.raises(ShapeMismatchError):
            stationarity_residual(e2, tree, controls, {1: np.zeros((3, 1))})

    def test_verbose_document(self, e3):
        certificate = certify(e3, solve_meanfield(e3), build_tree(e3))
        document = certificate.to_document(verbose=True)

        assert len(document["stage_max_residuals"]) == 1
        assert set(document["nodes"]) == {"adjoint", "residuals"}
