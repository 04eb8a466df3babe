"""
Adaptive sparse sensing with the (reweighted zero-attracting) normalized least mean fourth filter.

The filter consumes one (x_m, y_m) pair per iteration, cycling through the M measurements,
and follows

    h(n+1) = h(n) + mu_ass(n) e(n) x_m / ||x_m||^2 - rho sgn(h(n)) / (1 + eps |h(n)|)

with the variable step-size mu_ass(n) = mu_iss e^2 / (||x_m||^2 + e^2). The attractor is
subtracted: it is the gradient of the log-sum penalty, so adding it would push
coefficients away from zero.
"""

import math
from typing import Optional, Tuple

import numpy as np
from loguru import logger

from .exceptions import (
    DegenerateInputError, FilterDivergenceError, InvalidArgumentError, ShapeMismatchError
)
from .models import (
    CurveMetadata, FilterParams, FilterState, MeasurementSet, MseCurve, SensingEnsemble,
    Solver, SparseSignal
)


def _row_norm_sq(x_m: np.ndarray) -> float:
    norm_sq = float(np.dot(x_m, x_m))
    if norm_sq == 0.0:
        raise DegenerateInputError("sensing row has zero norm")
    return norm_sq


def _as_row(x_m, n_dim: int) -> np.ndarray:
    x_m = np.asarray(x_m, dtype=float)
    if x_m.shape != (n_dim,):
        raise ShapeMismatchError(f"row of shape {x_m.shape} does not match estimate length {n_dim}")
    return x_m


def prediction_error(state: FilterState, x_m: np.ndarray, y_m: float) -> float:
    """e_m(n) = y_m - <x_m, h(n)>."""
    x_m = _as_row(x_m, state.estimate.size)
    return float(y_m - np.dot(x_m, state.estimate))


def variable_step_size(params: FilterParams, x_m: np.ndarray, e: float) -> float:
    """mu_ass(n) = mu_iss e^2 / (||x_m||^2 + e^2), always in [0, mu_iss)."""
    norm_sq = _row_norm_sq(np.asarray(x_m, dtype=float))
    e_sq = e * e
    return params.mu_iss * e_sq / (norm_sq + e_sq)


def zero_attractor(estimate: np.ndarray, rho: float, epsilon: float) -> np.ndarray:
    """Elementwise rho sgn(h) / (1 + eps |h|); zero entries map to zero."""
    if rho < 0:
        raise InvalidArgumentError(f"attractor gain must be non-negative, got {rho}")
    if not (epsilon > 0):
        raise InvalidArgumentError(f"reweighted factor must be positive, got {epsilon}")
    estimate = np.asarray(estimate, dtype=float)
    return rho * np.sign(estimate) / (1.0 + epsilon * np.abs(estimate))


def log_sum_penalty(estimate: np.ndarray, rho: float, epsilon: float) -> float:
    """(rho/eps) sum log(1 + eps |h_i|); its gradient off zero is zero_attractor."""
    estimate = np.asarray(estimate, dtype=float)
    return float(rho / epsilon * np.sum(np.log1p(epsilon * np.abs(estimate))))


def nlmf_gradient(mu_iss: float, x_m: np.ndarray, e: float) -> np.ndarray:
    """Data term in step-size form: mu_ass e x_m / ||x_m||^2."""
    x_m = np.asarray(x_m, dtype=float)
    norm_sq = _row_norm_sq(x_m)
    mu_ass = mu_iss * e * e / (norm_sq + e * e)
    return (mu_ass * e / norm_sq) * x_m


def nlmf_gradient_expanded(mu_iss: float, x_m: np.ndarray, e: float) -> np.ndarray:
    """Data term in cubic form: mu_iss e^3 x_m / (||x_m||^2 (||x_m||^2 + e^2))."""
    x_m = np.asarray(x_m, dtype=float)
    norm_sq = _row_norm_sq(x_m)
    return (mu_iss * e ** 3 / (norm_sq * (norm_sq + e * e))) * x_m


def _update(state: FilterState, params: FilterParams, x_m, y_m: float, rho: float) -> FilterState:
    x_m = _as_row(x_m, state.estimate.size)
    norm_sq = _row_norm_sq(x_m)
    e = float(y_m - np.dot(x_m, state.estimate))
    mu_ass = params.mu_iss * e * e / (norm_sq + e * e)

    estimate = state.estimate + (mu_ass * e / norm_sq) * x_m
    if rho > 0:
        estimate -= zero_attractor(state.estimate, rho, params.epsilon)

    iteration = state.iteration + 1
    if not np.all(np.isfinite(estimate)):
        raise FilterDivergenceError(iteration)

    estimate.flags.writeable = False
    return FilterState.model_construct(
        estimate=estimate, iteration=iteration, last_error=e, last_step=mu_ass
    )


def rza_nlmf_update(state: FilterState, params: FilterParams, x_m: np.ndarray, y_m: float) -> FilterState:
    """One RZA-NLMF iteration using params.effective_rho."""
    return _update(state, params, x_m, y_m, params.effective_rho)


def nlmf_update(state: FilterState, params: FilterParams, x_m: np.ndarray, y_m: float) -> FilterState:
    """One plain NLMF iteration (no attractor)."""
    return _update(state, params, x_m, y_m, 0.0)


def row_schedule(n_iterations: int, m_rows: int) -> np.ndarray:
    """Row index used at iterations n = 0..n_iterations-1, i.e. n mod M."""
    if m_rows < 1:
        raise InvalidArgumentError("measurement set is empty")
    return np.arange(n_iterations) % m_rows


def run_ass(
    measurements: MeasurementSet,
    ensemble: SensingEnsemble,
    params: FilterParams,
    truth: Optional[SparseSignal] = None,
) -> Tuple[FilterState, Optional[MseCurve]]:
    """Run the adaptive filter from h(0) = 0 until the update norm drops below zeta or n_max.

    When ``truth`` is given, the returned curve holds ||h - h(n)||^2 for n = 0..final.
    """
    observations = measurements.observations
    matrix = ensemble.matrix
    if observations.size == 0:
        raise InvalidArgumentError("measurement set is empty")
    if observations.size != ensemble.m_rows:
        raise ShapeMismatchError(
            f"{observations.size} observations for {ensemble.m_rows} sensing rows"
        )
    n_dim = ensemble.n_cols
    if truth is not None and truth.n_dim != n_dim:
        raise ShapeMismatchError(f"truth has length {truth.n_dim}, sensing matrix has {n_dim} columns")

    rho = params.effective_rho
    update = rza_nlmf_update if rho > 0 else nlmf_update

    state = FilterState.initial(n_dim)
    trace = None
    if truth is not None:
        trace = np.empty(params.n_max + 1)
        trace[0] = truth.squared_norm

    stopped_on_zeta = False
    for m in row_schedule(params.n_max, ensemble.m_rows):
        previous = state.estimate
        state = update(state, params, matrix[m], observations[m])
        if trace is not None:
            diff = truth.coefficients - state.estimate
            trace[state.iteration] = np.dot(diff, diff)
        step = state.estimate - previous
        if math.sqrt(np.dot(step, step)) < params.zeta:
            stopped_on_zeta = True
            break

    logger.debug(
        f"ASS run finished after {state.iteration} updates "
        f"({'zeta' if stopped_on_zeta else 'n_max'} criterion)"
    )

    if trace is None:
        return state, None

    curve = MseCurve(
        iterations=np.arange(state.iteration + 1),
        mse=trace[: state.iteration + 1],
        metadata=CurveMetadata(
            solver=Solver.RZA_NLMF if rho > 0 else Solver.NLMF,
            k=truth.k_sparsity,
            snr_db=measurements.noise.snr_db,
            epsilon=params.epsilon if rho > 0 else math.nan,
            trials=1,
            seed=measurements.seed,
        ),
    )
    return state, curve
