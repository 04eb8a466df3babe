"""
Measurement model: sparse ground truth, Gaussian sensing matrices and noisy observations.

All generators take an explicit ``numpy.random.Generator``; nothing touches global RNG state.
"""

import math
from typing import NamedTuple, Optional

import numpy as np

from .exceptions import InvalidArgumentError, InvalidSparsityError, ShapeMismatchError
from .models import MeasurementSet, NoiseModel, SensingEnsemble, SparseSignal

SIGNAL_STREAM = 0
MATRIX_STREAM = 1
NOISE_STREAM = 2


class TrialStreams(NamedTuple):
    """Independent generators for the three random components of a trial."""
    signal: np.random.Generator
    matrix: np.random.Generator
    noise: np.random.Generator


def trial_streams(root_seed: int, trial_index: int) -> TrialStreams:
    """Derive the signal/matrix/noise sub-streams of one trial from the root seed."""
    if root_seed < 0 or trial_index < 0:
        raise InvalidArgumentError("seeds and trial indices must be non-negative")

    def stream(component: int) -> np.random.Generator:
        seq = np.random.SeedSequence(entropy=root_seed, spawn_key=(trial_index, component))
        return np.random.default_rng(seq)

    return TrialStreams(
        signal=stream(SIGNAL_STREAM),
        matrix=stream(MATRIX_STREAM),
        noise=stream(NOISE_STREAM),
    )


def generate_sparse_signal(n: int, k: int, rng: np.random.Generator) -> SparseSignal:
    """Draw a K-sparse vector with N(0, 1/K) entries on a uniformly random support."""
    if n < 1:
        raise InvalidArgumentError(f"signal length must be positive, got {n}")
    if k < 1 or k > n:
        raise InvalidSparsityError(f"sparsity must satisfy 0 < k <= n, got k={k}, n={n}")

    support = np.sort(rng.choice(n, size=k, replace=False))
    values = rng.normal(0.0, math.sqrt(1.0 / k), size=k)
    # An exact zero would shrink the support; redraw the affected entries
    while np.any(values == 0.0):
        zeros = values == 0.0
        values[zeros] = rng.normal(0.0, math.sqrt(1.0 / k), size=int(zeros.sum()))

    coefficients = np.zeros(n)
    coefficients[support] = values
    return SparseSignal(coefficients=coefficients, support=support)


def generate_sensing_matrix(m: int, n: int, sigma_sq: float, rng: np.random.Generator) -> SensingEnsemble:
    """Draw an M x N matrix with i.i.d. N(0, sigma^2) entries and no zero row."""
    if m < 1 or n < 1:
        raise InvalidArgumentError(f"matrix dimensions must be positive, got {m}x{n}")
    if not (sigma_sq > 0) or not math.isfinite(sigma_sq):
        raise InvalidArgumentError(f"entry variance must be positive and finite, got {sigma_sq}")

    scale = math.sqrt(sigma_sq)
    matrix = rng.normal(0.0, scale, size=(m, n))
    while True:
        zero_rows = ~matrix.any(axis=1)
        if not zero_rows.any():
            break
        matrix[zero_rows] = rng.normal(0.0, scale, size=(int(zero_rows.sum()), n))

    return SensingEnsemble(matrix=matrix, row_variance=sigma_sq)


def snr_to_noise_variance(snr_db: float, es: float = 1.0) -> float:
    """Noise variance for a given SNR, using sigma_n^2 = E_s * 10^(-SNR/20)."""
    if not (es > 0):
        raise InvalidArgumentError(f"signal power must be positive, got {es}")
    if snr_db == math.inf:
        return 0.0
    return es * 10.0 ** (-snr_db / 20.0)


def measure(
    signal: SparseSignal,
    ensemble: SensingEnsemble,
    noise: NoiseModel,
    rng: np.random.Generator,
    seed: Optional[int] = None,
) -> MeasurementSet:
    """Form y = X h + z with fresh z ~ N(0, sigma_n^2)."""
    if ensemble.n_cols != signal.n_dim:
        raise ShapeMismatchError(
            f"sensing matrix has {ensemble.n_cols} columns but signal has length {signal.n_dim}"
        )

    clean = ensemble.matrix @ signal.coefficients
    # Always consume the noise stream so paired runs stay aligned across SNR values
    draws = rng.standard_normal(ensemble.m_rows)
    sigma_n_sq = noise.sigma_n_sq
    observations = clean + math.sqrt(sigma_n_sq) * draws if sigma_n_sq > 0 else clean

    return MeasurementSet(
        observations=observations,
        signal=signal,
        ensemble=ensemble,
        noise=noise,
        seed=seed,
    )

