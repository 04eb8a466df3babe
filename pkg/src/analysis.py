"""
Closed-form performance predictions and the empirical MSE metric.

The steady-state recursion for the mean-square deviation b(n) = E||h(n) - h||^2 is

    b(n+1) = a1 b(n) + a2 b(n)^2 + a3 b(n)^3 + c + phi(n)

with phi(n) replaced by its upper bound rho^2 K. Each numeric factor of the coefficients
is a named constant below so that alternate readings can be substituted in tests.
"""

import math
from typing import Optional, Sequence, Union

import numpy as np

from .exceptions import InvalidArgumentError, NonContractiveError, ShapeMismatchError, SingularityError
from .models import CrlbAssResult, CrlbInputs, MsdCoefficients, MsdTrajectory, SparseSignal

# Gaussian noise moments: E[z^4] = 3 sigma_n^4, E[z^6] = 15 sigma_n^6
GAUSS_FOURTH_MOMENT = 3.0
GAUSS_SIXTH_MOMENT = 15.0

# a1 = 1 + (LINEAR_NOISE4 mu^2 sigma_n^4 - LINEAR_NOISE2 mu sigma_n^2) / N
LINEAR_NOISE4 = 9.0 * GAUSS_FOURTH_MOMENT
LINEAR_NOISE2 = 6.0
# a2 = (QUAD_NOISE2 mu^2 sigma_n^2 sigma^2 - QUAD_STEP mu sigma^2) / N + QUAD_CROSS mu^2 sigma^2 / (N sigma^2)
QUAD_NOISE2 = 27.0
QUAD_STEP = 6.0  # printed as "2 mu 3 sigma^2"
QUAD_CROSS = 18.0
# a3 = CUBIC mu^2 sigma_n^2 sigma^4 / N
CUBIC = GAUSS_SIXTH_MOMENT
# c = -DRIVE mu^2 sigma_n^6 / (N sigma^2)
DRIVE = GAUSS_SIXTH_MOMENT

# Relative size below which a bound denominator counts as zero
SINGULAR_RTOL = 1e-12


def crlb_nss(inp: CrlbInputs) -> float:
    """K sigma_n^2 / N."""
    return inp.k_sparsity * inp.sigma_n_sq / inp.n_dim


def msd_coefficients(inp: CrlbInputs, phi: Optional[float] = None) -> MsdCoefficients:
    """Coefficients of the MSD recursion; phi defaults to its bound rho^2 K."""
    mu, n = inp.mu_iss, inp.n_dim
    s2, sn2 = inp.sigma_sq, inp.sigma_n_sq
    if phi is None:
        phi = inp.rho ** 2 * inp.k_sparsity

    linear = 1.0 + (LINEAR_NOISE4 * mu ** 2 * sn2 ** 2 - LINEAR_NOISE2 * mu * sn2) / n
    quadratic = (
        (QUAD_NOISE2 * mu ** 2 * sn2 * s2 - QUAD_STEP * mu * s2) / n
        + QUAD_CROSS * mu ** 2 * s2 / (n * s2)
    )
    cubic = CUBIC * mu ** 2 * sn2 * s2 ** 2 / n
    drive = -DRIVE * mu ** 2 * sn2 ** 3 / (n * s2) + phi
    return MsdCoefficients(linear=linear, quadratic=quadratic, cubic=cubic, drive=drive)


def _evaluate(coefficients: MsdCoefficients, b: float, linearized: bool) -> float:
    value = coefficients.linear * b + coefficients.drive
    if not linearized:
        value += coefficients.quadratic * b * b + coefficients.cubic * b * b * b
    return value


def msd_recursion_step(b: float, inp: CrlbInputs, linearized: bool = False, phi: Optional[float] = None) -> float:
    """Evaluate one step of the MSD recursion from b(n) = b."""
    if b < 0:
        raise InvalidArgumentError(f"mean-square deviation must be non-negative, got {b}")
    return _evaluate(msd_coefficients(inp, phi), b, linearized)


def iterate_msd(
    inp: CrlbInputs,
    b0: float = 1.0,
    steps: int = 10000,
    linearized: bool = True,
    tol: float = 0.0,
) -> MsdTrajectory:
    """Iterate the recursion from b0; stops early once |b(n+1) - b(n)| <= tol |b(n+1)|."""
    if steps < 1:
        raise InvalidArgumentError("steps must be positive")
    coefficients = msd_coefficients(inp)
    if abs(coefficients.linear) >= 1.0:
        raise NonContractiveError(coefficients.linear)

    values = [float(b0)]
    b = float(b0)
    for step in range(1, steps + 1):
        nxt = _evaluate(coefficients, b, linearized)
        if not math.isfinite(nxt):
            raise InvalidArgumentError(f"MSD recursion left the finite range at step {step}")
        values.append(nxt)
        if abs(nxt - b) <= tol * abs(nxt):
            break
        b = nxt
    return MsdTrajectory(values=tuple(values))


def _check_denominator(value: float, scale: float, name: str) -> None:
    if abs(value) <= SINGULAR_RTOL * scale:
        raise SingularityError(name)


def crlb_ass(inp: CrlbInputs) -> CrlbAssResult:
    """Steady-state MSD of the adaptive filter with the b^2, b^3 terms dropped.

    value = 5 mu sn^4 / (9 mu sn^2 s^2 - 2 s^2) - rho^2 N K / (27 mu^2 sn^4 - 6 mu sn^2)

    The raw value is returned; ``valid`` is set only when it is positive and the
    linearized recursion contracts.
    """
    mu, n, k = inp.mu_iss, inp.n_dim, inp.k_sparsity
    s2, sn2 = inp.sigma_sq, inp.sigma_n_sq

    den_signal = 9.0 * mu * sn2 * s2 - 2.0 * s2
    _check_denominator(den_signal, max(9.0 * mu * sn2 * s2, 2.0 * s2), "9*mu_iss*sigma_n^2*sigma^2 - 2*sigma^2")
    value = 5.0 * mu * sn2 ** 2 / den_signal

    if inp.rho > 0 and k > 0:
        den_attractor = 27.0 * mu ** 2 * sn2 ** 2 - 6.0 * mu * sn2
        _check_denominator(
            den_attractor,
            max(27.0 * mu ** 2 * sn2 ** 2, 6.0 * mu * sn2),
            "27*mu_iss^2*sigma_n^4 - 6*mu_iss*sigma_n^2",
        )
        value -= inp.rho ** 2 * n * k / den_attractor

    linear = msd_coefficients(inp).linear
    return CrlbAssResult(value=value, valid=value > 0 and abs(linear) < 1.0, linear_coefficient=linear)


def empirical_mse(
    truth: Union[SparseSignal, Sequence[SparseSignal]],
    estimates: Sequence[np.ndarray],
) -> float:
    """Mean over trials of ||h - h_est||^2; ``truth`` may be shared or one per trial."""
    stacked = np.asarray(estimates, dtype=float)
    if stacked.size == 0 or len(stacked) == 0:
        raise InvalidArgumentError("at least one trial estimate is required")
    if stacked.ndim != 2:
        raise ShapeMismatchError("estimates must be a sequence of 1-D vectors of equal length")

    if isinstance(truth, SparseSignal):
        if truth.n_dim != stacked.shape[1]:
            raise ShapeMismatchError(f"truth has length {truth.n_dim}, estimates have {stacked.shape[1]}")
        truths = np.broadcast_to(truth.coefficients, stacked.shape)
    else:
        if len(truth) != len(stacked):
            raise ShapeMismatchError(f"{len(truth)} truths for {len(stacked)} estimates")
        truths = np.asarray([signal.coefficients for signal in truth])

    if truths.shape != stacked.shape:
        raise ShapeMismatchError(f"truth shape {truths.shape} does not match estimates {stacked.shape}")

    errors = truths - stacked
    return float(np.mean(np.sum(errors * errors, axis=1)))


def mse_to_db(value: float) -> float:
    """10 log10(value); -inf for zero, nan for negative inputs."""
    if value == 0:
        return -math.inf
    if value < 0 or math.isnan(value):
        return math.nan
    return 10.0 * math.log10(value)
