"""
Tests for the OMP and BPDN baselines.
"""

import math

import numpy as np
import pytest

from src.baselines import (
    bpdn_objective, bpdn_solve, default_bpdn_lambda, lipschitz_constant, omp_solve, soft_threshold
)
from src.exceptions import InvalidArgumentError, ShapeMismatchError
from src.models import BpdnConfig, NoiseModel, OmpConfig, SensingEnsemble, SparseSignal
from src.sensing import generate_sensing_matrix, generate_sparse_signal, measure, trial_streams


def seeded_problem(trial, snr_db=math.inf, n=40, m=20, k=2):
    streams = trial_streams(123, trial)
    signal = generate_sparse_signal(n, k, streams.signal)
    ensemble = generate_sensing_matrix(m, n, 1.0, streams.matrix)
    measurements = measure(signal, ensemble, NoiseModel(snr_db=snr_db), streams.noise)
    return signal, ensemble, measurements


class TestHelpers:
    """Test BPDN building blocks."""

    def test_soft_threshold(self):
        """Shrink toward zero by the threshold, clipping at zero."""
        values = soft_threshold(np.array([3.0, -0.5, 0.2, -2.0]), 1.0)
        assert values.tolist() == [2.0, 0.0, 0.0, -1.0]

    def test_default_lambda(self):
        """lambda = sigma_n sqrt(2 ln N)."""
        assert default_bpdn_lambda(4.0, 40) == pytest.approx(2.0 * math.sqrt(2 * math.log(40)))
        assert default_bpdn_lambda(0.0, 40) == 0.0

    def test_lipschitz_constant(self):
        """Power iteration finds the largest eigenvalue of X^T X."""
        matrix = np.random.default_rng(0).normal(size=(20, 40))
        expected = np.linalg.norm(matrix, 2) ** 2
        assert lipschitz_constant(matrix) == pytest.approx(expected, rel=1e-8)

    def test_objective(self):
        """0.5 ||y - Xh||^2 + lambda ||h||_1."""
        matrix = np.eye(2)
        value = bpdn_objective(matrix, np.array([1.0, 1.0]), np.array([1.0, -1.0]), 0.5)
        assert value == pytest.approx(0.5 * 4.0 + 1.0)


class TestBpdn:
    """Test the iterative soft-thresholding solver."""

    def test_large_lambda_gives_zero(self):
        """lambda >= ||X^T y||_inf makes zero optimal."""
        _, ensemble, measurements = seeded_problem(0, snr_db=10.0)
        lam = float(np.max(np.abs(ensemble.matrix.T @ measurements.observations))) * 1.01
        result = bpdn_solve(ensemble, measurements, BpdnConfig(lambda_nss=lam))
        assert np.all(result.estimate == 0.0)
        assert result.support == ()
        assert result.converged

    def test_objective_non_increasing(self):
        """Each proximal step does not increase the objective."""
        _, ensemble, measurements = seeded_problem(1, snr_db=10.0)
        result = bpdn_solve(ensemble, measurements, BpdnConfig(max_iters=500))
        history = np.array(result.objective_history)
        assert np.all(np.diff(history) <= 1e-12 * history[:-1])

    def test_lambda_required_for_raw_vectors(self):
        """Without the noise model lambda must be given."""
        _, ensemble, measurements = seeded_problem(2, snr_db=10.0)
        with pytest.raises(InvalidArgumentError):
            bpdn_solve(ensemble, np.array(measurements.observations), BpdnConfig())

    def test_raw_vector_with_lambda(self):
        """Raw observation vectors are accepted when lambda is known."""
        _, ensemble, measurements = seeded_problem(2, snr_db=10.0)
        a = bpdn_solve(ensemble, np.array(measurements.observations), BpdnConfig(lambda_nss=0.5))
        b = bpdn_solve(ensemble, measurements, BpdnConfig(lambda_nss=0.5))
        assert np.array_equal(a.estimate, b.estimate)

    def test_identity_without_penalty_returns_observations(self):
        """X = I and lambda = 0 give h = y."""
        y = np.array([3.0, -0.5, 0.2, -2.0, 1.2])
        result = bpdn_solve(SensingEnsemble(matrix=np.eye(5)), y, BpdnConfig(lambda_nss=0.0))
        np.testing.assert_allclose(result.estimate, y, atol=1e-12)

    def test_identity_is_soft_thresholding(self):
        """X = I and lambda > 0 give soft_threshold(y, lambda)."""
        y = np.array([3.0, -0.5, 0.2, -2.0, 1.2])
        for lam in (0.1, 1.0, 2.5):
            result = bpdn_solve(SensingEnsemble(matrix=np.eye(5)), y, BpdnConfig(lambda_nss=lam))
            np.testing.assert_allclose(result.estimate, soft_threshold(y, lam), atol=1e-12)

    def test_shape_mismatch(self):
        """Observation length must equal M."""
        _, ensemble, _ = seeded_problem(3)
        with pytest.raises(ShapeMismatchError):
            bpdn_solve(ensemble, np.ones(5), BpdnConfig(lambda_nss=0.1))

    @pytest.mark.slow
    def test_optimality_conditions(self):
        """Converged solutions satisfy the subgradient conditions on 100 instances."""
        for trial in range(100):
            _, ensemble, measurements = seeded_problem(trial, snr_db=10.0)
            cfg = BpdnConfig(max_iters=50000, tolerance=1e-14)
            result = bpdn_solve(ensemble, measurements, cfg)
            lam = default_bpdn_lambda(measurements.noise.sigma_n_sq, ensemble.n_cols)

            gradient = ensemble.matrix.T @ (measurements.observations - ensemble.matrix @ result.estimate)
            active = result.estimate != 0.0
            tol = 1e-4
            assert np.all(np.abs(gradient[active] - lam * np.sign(result.estimate[active])) <= tol)
            assert np.all(np.abs(gradient[~active]) <= lam + tol)


class TestOmp:
    """Test orthogonal matching pursuit."""

    def test_exact_support_recovery_rate(self):
        """Noiseless K=2 supports are recovered in at least 95% of 1000 trials."""
        hits = 0
        for trial in range(1000):
            signal, ensemble, measurements = seeded_problem(trial)
            result = omp_solve(ensemble, measurements, OmpConfig())
            hits += result.support == signal.support
        assert hits >= 950

    def test_residual_orthogonal_to_selection(self):
        """After the final refit the residual is orthogonal to the chosen columns."""
        for trial in range(20):
            _, ensemble, measurements = seeded_problem(trial, snr_db=6.0, k=6)
            result = omp_solve(ensemble, measurements, OmpConfig())
            y = measurements.observations
            residual = y - ensemble.matrix @ result.estimate
            selected = ensemble.matrix[:, list(result.support)]
            assert np.all(np.abs(selected.T @ residual) < 1e-9 * np.linalg.norm(y))

    def test_residual_orthogonal_after_every_refit(self):
        """The residual after each intermediate refit is orthogonal to the atoms chosen so far."""
        for trial in range(10):
            _, ensemble, measurements = seeded_problem(trial, snr_db=6.0, k=6)
            y = measurements.observations
            previous = set()
            for atoms in range(1, 7):
                result = omp_solve(ensemble, measurements, OmpConfig(k_target=atoms))
                assert previous < set(result.support)
                residual = y - ensemble.matrix @ result.estimate
                selected = ensemble.matrix[:, list(result.support)]
                assert np.all(np.abs(selected.T @ residual) < 1e-9 * np.linalg.norm(y))
                previous = set(result.support)

    def test_never_reselects(self):
        """Selected atoms are distinct and at most k_target."""
        _, ensemble, measurements = seeded_problem(4, snr_db=0.0)
        result = omp_solve(ensemble, measurements, OmpConfig(k_target=10))
        assert len(result.support) == len(set(result.support)) == 10
        assert result.iterations == 10

    def test_stops_on_zero_residual(self):
        """An exactly explained signal stops before k_target atoms."""
        signal = SparseSignal(coefficients=[0.0, 3.0, 0.0, -1.0, 0.0], support=[1, 3])
        ensemble = SensingEnsemble(matrix=np.eye(5))
        y = ensemble.matrix @ signal.coefficients
        result = omp_solve(ensemble, y, OmpConfig(k_target=5))
        assert result.support == (1, 3)
        assert result.converged
        np.testing.assert_allclose(result.estimate, signal.coefficients, atol=1e-12)

    def test_k_target_too_large(self):
        """More atoms than min(M, N) is invalid."""
        _, ensemble, measurements = seeded_problem(5)
        with pytest.raises(InvalidArgumentError):
            omp_solve(ensemble, measurements, OmpConfig(k_target=21))

    def test_oracle_sparsity_default(self):
        """Without k_target the true K is used when known."""
        _, ensemble, measurements = seeded_problem(6, snr_db=3.0, k=6)
        result = omp_solve(ensemble, measurements, OmpConfig())
        assert len(result.support) == 6
