"""
Tests for closed-form bounds and the MSD recursion.
"""

import math

import numpy as np
import pytest

from src.analysis import (
    crlb_ass, crlb_nss, empirical_mse, iterate_msd, msd_coefficients, msd_recursion_step, mse_to_db
)
from src.exceptions import InvalidArgumentError, NonContractiveError, ShapeMismatchError, SingularityError
from src.models import CrlbInputs, SparseSignal
from src.sensing import generate_sparse_signal


def hand_crlb_ass(mu, sn2, s2, n, k, rho):
    first = 5 * mu * sn2 ** 2 / (9 * mu * sn2 * s2 - 2 * s2)
    second = rho ** 2 * n * k / (27 * mu ** 2 * sn2 ** 2 - 6 * mu * sn2) if rho else 0.0
    return first - second


# (mu_iss, sigma_n^2, sigma^2, N, K, rho)
BOUND_CASES = [
    (1.5, 1.0, 1.0, 40, 2, 1.5e-4),
    (1.5, 10 ** -0.5, 1.0, 40, 6, 0.0),
    (0.5, 0.1, 2.0, 20, 3, 1e-3),
    (0.2, 0.25, 1.0, 100, 10, 0.05),
    (1.0, 0.01, 0.5, 64, 1, 2e-2),
]

# Parameter sets with 9 mu sigma_n^2 < 2, so the linearized recursion contracts
CONTRACTIVE_CASES = [
    (0.5, 0.1, 1.0, 40),
    (1.5, 0.1, 1.0, 40),
    (1.0, 0.05, 2.0, 20),
    (0.2, 0.5, 1.0, 10),
    (1.5, 0.01, 0.5, 40),
]


class TestCrlbNss:
    """Test the nonlinear sparse sensing bound."""

    def test_exact_value(self):
        """K sigma_n^2 / N."""
        assert crlb_nss(CrlbInputs(n_dim=40, k_sparsity=2, sigma_n_sq=1.0)) == 0.05

    def test_scaling(self):
        """Linear in K and sigma_n^2, inverse in N."""
        for n in (20, 40, 80):
            for k in (1, 2, 6, 10):
                for sn2 in (0.1, 0.5, 1.0):
                    value = crlb_nss(CrlbInputs(n_dim=n, k_sparsity=k, sigma_n_sq=sn2))
                    assert value == pytest.approx(k * sn2 / n, rel=1e-12)
                    doubled_k = crlb_nss(CrlbInputs(n_dim=n, k_sparsity=2 * k, sigma_n_sq=sn2))
                    doubled_n = crlb_nss(CrlbInputs(n_dim=2 * n, k_sparsity=k, sigma_n_sq=sn2))
                    assert doubled_k == pytest.approx(2 * value, rel=1e-12)
                    assert doubled_n == pytest.approx(value / 2, rel=1e-12)

    def test_noiseless(self):
        """Zero noise, zero bound."""
        assert crlb_nss(CrlbInputs(n_dim=40, k_sparsity=2, sigma_n_sq=0.0)) == 0.0


class TestCrlbAss:
    """Test the adaptive sparse sensing bound."""

    @pytest.mark.parametrize("mu,sn2,s2,n,k,rho", BOUND_CASES)
    def test_matches_hand_evaluation(self, mu, sn2, s2, n, k, rho):
        """Closed form agrees with a direct evaluation to 1e-12 relative."""
        inp = CrlbInputs(n_dim=n, k_sparsity=k, sigma_n_sq=sn2, sigma_sq=s2, mu_iss=mu, rho=rho)
        result = crlb_ass(inp)
        assert result.value == pytest.approx(hand_crlb_ass(mu, sn2, s2, n, k, rho), rel=1e-12)

    def test_default_point_outside_validity(self):
        """At mu=1.5 and 10 dB the linear coefficient exceeds one."""
        inp = CrlbInputs(n_dim=40, k_sparsity=2, sigma_n_sq=10 ** -0.5, mu_iss=1.5)
        result = crlb_ass(inp)
        assert result.value == pytest.approx(0.75 / (13.5 * 10 ** -0.5 - 2.0), rel=1e-12)
        assert result.value == pytest.approx(0.3305, abs=1e-4)
        assert result.linear_coefficient > 1.0
        assert result.valid is False

    def test_contractive_point_is_negative(self):
        """Where the recursion contracts the first term is negative, hence not valid."""
        inp = CrlbInputs(n_dim=40, k_sparsity=2, sigma_n_sq=0.1, mu_iss=0.5)
        result = crlb_ass(inp)
        assert result.value < 0
        assert abs(result.linear_coefficient) < 1
        assert result.valid is False

    def test_singular_step_size(self):
        """mu = 2 / (9 sigma_n^2) zeroes the first denominator."""
        inp = CrlbInputs(n_dim=40, k_sparsity=2, sigma_n_sq=0.5, mu_iss=2.0 / 4.5)
        with pytest.raises(SingularityError) as excinfo:
            crlb_ass(inp)
        assert "9*mu_iss" in excinfo.value.denominator

    def test_noiseless_with_attractor_is_singular(self):
        """sigma_n^2 = 0 zeroes the attractor denominator."""
        inp = CrlbInputs(n_dim=40, k_sparsity=2, sigma_n_sq=0.0, rho=1e-4)
        with pytest.raises(SingularityError) as excinfo:
            crlb_ass(inp)
        assert "27*mu_iss" in excinfo.value.denominator

    def test_noiseless_without_attractor(self):
        """rho = 0 and no noise give zero."""
        result = crlb_ass(CrlbInputs(n_dim=40, k_sparsity=2, sigma_n_sq=0.0))
        assert result.value == 0.0


class TestMsdRecursion:
    """Test the MSD recursion evaluators."""

    def test_coefficients(self):
        """Coefficients at a hand-checked point."""
        inp = CrlbInputs(n_dim=10, k_sparsity=2, sigma_n_sq=0.5, sigma_sq=2.0, mu_iss=1.0, rho=0.1)
        c = msd_coefficients(inp)
        assert c.linear == pytest.approx(1 + (27 * 0.25 - 6 * 0.5) / 10)
        assert c.quadratic == pytest.approx((27 * 0.5 * 2.0 - 6 * 2.0) / 10 + 18 / 10)
        assert c.cubic == pytest.approx(15 * 0.5 * 4.0 / 10)
        assert c.drive == pytest.approx(-15 * 0.125 / 20 + 0.01 * 2)

    def test_step_linearized_drops_higher_terms(self):
        """The linearized step only keeps a1 b + c."""
        inp = CrlbInputs(n_dim=10, k_sparsity=2, sigma_n_sq=0.5, mu_iss=1.0)
        c = msd_coefficients(inp)
        assert msd_recursion_step(0.3, inp, linearized=True) == pytest.approx(c.linear * 0.3 + c.drive)
        full = c.linear * 0.3 + c.quadratic * 0.09 + c.cubic * 0.027 + c.drive
        assert msd_recursion_step(0.3, inp) == pytest.approx(full)

    def test_step_with_explicit_phi(self):
        """phi replaces the rho^2 K bound."""
        inp = CrlbInputs(n_dim=10, k_sparsity=2, sigma_n_sq=0.5, mu_iss=1.0, rho=0.1)
        assert msd_recursion_step(0.0, inp, phi=0.0) == pytest.approx(msd_coefficients(inp, phi=0.0).drive)

    def test_negative_b_rejected(self):
        """MSD is non-negative."""
        with pytest.raises(InvalidArgumentError):
            msd_recursion_step(-1.0, CrlbInputs(n_dim=10, k_sparsity=2, sigma_n_sq=0.5))

    @pytest.mark.parametrize("mu,sn2,s2,n", CONTRACTIVE_CASES)
    def test_linearized_fixed_point_matches_bound(self, mu, sn2, s2, n):
        """Iterating the linearized recursion converges to the first bound term."""
        inp = CrlbInputs(n_dim=n, k_sparsity=2, sigma_n_sq=sn2, sigma_sq=s2, mu_iss=mu)
        trajectory = iterate_msd(inp, b0=1.0, steps=200000, linearized=True, tol=1e-15)
        expected = crlb_ass(inp).value
        assert trajectory.final == pytest.approx(expected, rel=1e-8)

    def test_non_contractive(self):
        """|a1| >= 1 raises with the coefficient."""
        inp = CrlbInputs(n_dim=40, k_sparsity=2, sigma_n_sq=10 ** -0.5, mu_iss=1.5)
        with pytest.raises(NonContractiveError) as excinfo:
            iterate_msd(inp)
        assert excinfo.value.coefficient > 1.0

    def test_trajectory_starts_at_b0(self):
        """The first value is the starting point."""
        inp = CrlbInputs(n_dim=40, k_sparsity=2, sigma_n_sq=0.1, mu_iss=0.5)
        trajectory = iterate_msd(inp, b0=0.7, steps=5)
        assert trajectory.values[0] == 0.7
        assert len(trajectory.values) == 6


class TestEmpiricalMse:
    """Test the empirical MSE metric."""

    def test_shared_truth(self):
        """Mean squared error over trials against one truth."""
        truth = SparseSignal(coefficients=[1.0, 0.0], support=[0])
        estimates = [np.array([1.0, 1.0]), np.array([0.0, 0.0])]
        assert empirical_mse(truth, estimates) == pytest.approx(1.0)

    def test_per_trial_truths(self):
        """One truth per trial."""
        truths = [
            SparseSignal(coefficients=[1.0, 0.0], support=[0]),
            SparseSignal(coefficients=[0.0, 2.0], support=[1]),
        ]
        estimates = [np.array([1.0, 0.0]), np.array([0.0, 0.0])]
        assert empirical_mse(truths, estimates) == pytest.approx(2.0)

    def test_trial_order_irrelevant(self):
        """Permuting trials leaves the MSE unchanged."""
        rng = np.random.default_rng(13)
        truths = [generate_sparse_signal(40, 6, rng) for _ in range(50)]
        estimates = [rng.normal(size=40) for _ in range(50)]
        order = rng.permutation(50)
        value = empirical_mse(truths, estimates)
        shuffled = empirical_mse([truths[i] for i in order], [estimates[i] for i in order])
        assert value >= 0.0
        assert shuffled == pytest.approx(value, rel=1e-12)

    def test_zero_estimate_gives_unit_mse(self):
        """h~ = 0 scores E||h||^2 = 1 on unit-energy signals."""
        rng = np.random.default_rng(14)
        truths = [generate_sparse_signal(40, 6, rng) for _ in range(5000)]
        assert empirical_mse(truths, [np.zeros(40)] * 5000) == pytest.approx(1.0, abs=0.05)

    def test_empty(self):
        """No trials is an error."""
        truth = SparseSignal(coefficients=[1.0], support=[0])
        with pytest.raises(InvalidArgumentError):
            empirical_mse(truth, [])

    def test_length_mismatch(self):
        """Estimate length must equal N."""
        truth = SparseSignal(coefficients=[1.0, 0.0], support=[0])
        with pytest.raises(ShapeMismatchError):
            empirical_mse(truth, [np.zeros(3)])


class TestMseToDb:
    """Test the dB conversion."""

    def test_values(self):
        """10 log10."""
        assert mse_to_db(1.0) == 0.0
        assert mse_to_db(0.1) == pytest.approx(-10.0)
        assert mse_to_db(0.0) == -math.inf
        assert math.isnan(mse_to_db(-1.0))
