"""
Nonlinear sparse sensing baselines: BPDN by proximal gradient and OMP greedy pursuit.
"""

import math
from typing import Union

import numpy as np
from loguru import logger

from .exceptions import InvalidArgumentError, ShapeMismatchError
from .models import BpdnConfig, MeasurementSet, OmpConfig, RecoveryResult, SensingEnsemble

Observations = Union[MeasurementSet, np.ndarray]


def _observations(y: Observations, ensemble: SensingEnsemble) -> np.ndarray:
    values = y.observations if isinstance(y, MeasurementSet) else np.asarray(y, dtype=float)
    if values.ndim != 1 or values.size != ensemble.m_rows:
        raise ShapeMismatchError(
            f"observation vector of shape {values.shape} does not match {ensemble.m_rows} sensing rows"
        )
    if not np.all(np.isfinite(values)):
        raise InvalidArgumentError("observations must be finite")
    return values


def default_bpdn_lambda(sigma_n_sq: float, n_dim: int) -> float:
    """lambda = sigma_n sqrt(2 ln N)."""
    return math.sqrt(sigma_n_sq) * math.sqrt(2.0 * math.log(n_dim))


def soft_threshold(values: np.ndarray, threshold: float) -> np.ndarray:
    return np.sign(values) * np.maximum(np.abs(values) - threshold, 0.0)


def bpdn_objective(matrix: np.ndarray, y: np.ndarray, estimate: np.ndarray, lambda_nss: float) -> float:
    """0.5 ||y - X h||^2 + lambda ||h||_1."""
    residual = y - matrix @ estimate
    return float(0.5 * np.dot(residual, residual) + lambda_nss * np.sum(np.abs(estimate)))


def lipschitz_constant(matrix: np.ndarray, max_iters: int = 1000, tol: float = 1e-12) -> float:
    """Largest eigenvalue of X^T X by power iteration."""
    gram = matrix.T @ matrix
    vector = np.full(gram.shape[0], 1.0 / math.sqrt(gram.shape[0]))
    estimate = 0.0
    for _ in range(max_iters):
        image = gram @ vector
        norm = float(np.linalg.norm(image))
        if norm == 0.0:
            return 0.0
        vector = image / norm
        if abs(norm - estimate) <= tol * norm:
            return norm
        estimate = norm
    return estimate


def bpdn_solve(ensemble: SensingEnsemble, y: Observations, cfg: BpdnConfig) -> RecoveryResult:
    """Approximate argmin 0.5||y - Xh||^2 + lambda ||h||_1 with iterative soft-thresholding."""
    observations = _observations(y, ensemble)
    matrix = ensemble.matrix

    lambda_nss = cfg.lambda_nss
    if lambda_nss is None:
        if not isinstance(y, MeasurementSet):
            raise InvalidArgumentError("lambda_nss is required when the noise level is unknown")
        lambda_nss = default_bpdn_lambda(y.noise.sigma_n_sq, ensemble.n_cols)
    if not math.isfinite(lambda_nss):
        raise InvalidArgumentError("lambda_nss must be finite")

    lipschitz = lipschitz_constant(matrix, max_iters=cfg.power_iters)
    step = 1.0 / lipschitz
    threshold = step * lambda_nss

    estimate = np.zeros(ensemble.n_cols)
    objective = bpdn_objective(matrix, observations, estimate, lambda_nss)
    history = [objective]
    converged = False
    iterations = 0

    for iterations in range(1, cfg.max_iters + 1):
        gradient = matrix.T @ (matrix @ estimate - observations)
        estimate = soft_threshold(estimate - step * gradient, threshold)
        new_objective = bpdn_objective(matrix, observations, estimate, lambda_nss)
        history.append(new_objective)
        if objective - new_objective <= cfg.tolerance * max(abs(objective), np.finfo(float).tiny):
            converged = True
            break
        objective = new_objective

    if not converged:
        logger.debug(f"BPDN stopped at max_iters={cfg.max_iters} without meeting tolerance")

    residual = observations - matrix @ estimate
    return RecoveryResult(
        estimate=estimate,
        support=tuple(int(i) for i in np.flatnonzero(estimate)),
        iterations=iterations,
        converged=converged,
        residual_norm=float(np.linalg.norm(residual)),
        objective_history=tuple(history),
    )


def omp_solve(ensemble: SensingEnsemble, y: Observations, cfg: OmpConfig) -> RecoveryResult:
    """Orthogonal matching pursuit with a least-squares refit after every selection."""
    observations = _observations(y, ensemble)
    matrix = ensemble.matrix
    max_atoms = min(ensemble.m_rows, ensemble.n_cols)

    k_target = cfg.k_target
    if k_target is None:
        # Oracle sparsity when the measurements know their signal, residual-driven otherwise
        k_target = y.signal.k_sparsity if isinstance(y, MeasurementSet) else max_atoms
    if k_target > max_atoms:
        raise InvalidArgumentError(f"k_target={k_target} exceeds min(M, N)={max_atoms}")

    column_norms = np.linalg.norm(matrix, axis=0)
    usable = column_norms > 0
    safe_norms = np.where(usable, column_norms, 1.0)

    residual = observations.copy()
    support = []
    coefficients = np.zeros(0)
    rank_deficient = False

    while len(support) < k_target:
        if np.linalg.norm(residual) <= cfg.residual_tol:
            break
        correlation = np.abs(matrix.T @ residual) / safe_norms
        correlation[~usable] = -np.inf
        correlation[support] = -np.inf
        support.append(int(np.argmax(correlation)))

        selected = matrix[:, support]
        coefficients, _, rank, _ = np.linalg.lstsq(selected, observations, rcond=None)
        if rank < len(support):
            rank_deficient = True
        residual = observations - selected @ coefficients

    if rank_deficient:
        logger.warning(f"OMP refit was rank deficient on support {sorted(support)}")

    estimate = np.zeros(ensemble.n_cols)
    estimate[support] = coefficients
    residual_norm = float(np.linalg.norm(residual))
    return RecoveryResult(
        estimate=estimate,
        support=tuple(sorted(support)),
        iterations=len(support),
        converged=len(support) == k_target or residual_norm <= cfg.residual_tol,
        rank_deficient=rank_deficient,
        residual_norm=residual_norm,
    )
