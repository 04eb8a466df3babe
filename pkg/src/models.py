"""
Data models for sparse sensing experiments.
"""

import math
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from . import config
from .exceptions import ConfigError


def _frozen_array(value: Any, dtype=float) -> np.ndarray:
    """Copy into a read-only numpy array."""
    array = np.array(value, dtype=dtype, copy=True)
    array.flags.writeable = False
    return array


def _split_list(value: Any) -> Any:
    """Accept comma-separated strings for list fields."""
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


ARRAY_CONFIG = ConfigDict(frozen=True, arbitrary_types_allowed=True)


class Solver(str, Enum):
    """Reconstruction methods available to the harness."""
    RZA_NLMF = "rza-nlmf"
    NLMF = "nlmf"
    OMP = "omp"
    BPDN = "bpdn"

    @property
    def is_adaptive(self) -> bool:
        return self in (Solver.RZA_NLMF, Solver.NLMF)

    @property
    def uses_epsilon(self) -> bool:
        return self is Solver.RZA_NLMF


class RhoRule(str, Enum):
    """How the attractor gain is derived from (mu_iss, lambda, epsilon)."""
    GRADIENT = "gradient"  # mu * lambda * epsilon
    PRINTED = "printed"  # mu * lambda / epsilon


# ---------------------------------------------------------------------------
# Measurement model
# ---------------------------------------------------------------------------

class SparseSignal(BaseModel):
    """Ground-truth K-sparse vector h."""
    model_config = ARRAY_CONFIG

    coefficients: np.ndarray
    support: Tuple[int, ...]

    @field_validator("coefficients", mode="before")
    @classmethod
    def _coerce_coefficients(cls, value):
        array = _frozen_array(value)
        if array.ndim != 1 or array.size == 0:
            raise ValueError("coefficients must be a non-empty 1-D vector")
        if not np.all(np.isfinite(array)):
            raise ValueError("coefficients must be finite")
        return array

    @field_validator("support", mode="before")
    @classmethod
    def _coerce_support(cls, value):
        return tuple(sorted(int(i) for i in value))

    @model_validator(mode="after")
    def _check_support(self):
        n = self.coefficients.size
        if len(set(self.support)) != len(self.support):
            raise ValueError("support indices must be distinct")
        if any(i < 0 or i >= n for i in self.support):
            raise ValueError(f"support indices must lie in [0, {n})")
        nonzero = tuple(int(i) for i in np.flatnonzero(self.coefficients))
        if nonzero != self.support:
            raise ValueError("coefficients must be nonzero exactly on the support")
        return self

    @property
    def n_dim(self) -> int:
        return int(self.coefficients.size)

    @property
    def k_sparsity(self) -> int:
        return len(self.support)

    @property
    def squared_norm(self) -> float:
        return float(np.dot(self.coefficients, self.coefficients))


class SensingEnsemble(BaseModel):
    """Sensing matrix X with its entry variance."""
    model_config = ARRAY_CONFIG

    matrix: np.ndarray
    row_variance: float = Field(default=config.SIGMA_SQ, gt=0, description="sigma^2 of the entries")

    @field_validator("matrix", mode="before")
    @classmethod
    def _coerce_matrix(cls, value):
        array = _frozen_array(value)
        if array.ndim != 2 or 0 in array.shape:
            raise ValueError("matrix must be a non-empty 2-D array")
        if not np.all(np.isfinite(array)):
            raise ValueError("matrix entries must be finite")
        if np.any(~array.any(axis=1)):
            raise ValueError("matrix must not contain an all-zero row")
        return array

    @property
    def m_rows(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def n_cols(self) -> int:
        return int(self.matrix.shape[1])


class NoiseModel(BaseModel):
    """Additive Gaussian noise specified through the SNR in dB."""
    model_config = ConfigDict(frozen=True)

    snr_db: float = Field(description="SNR in dB; +inf selects noiseless measurements")
    es: float = Field(default=config.SIGNAL_POWER, gt=0, description="Unit signal power E_s")

    @field_validator("snr_db")
    @classmethod
    def _check_snr(cls, value: float) -> float:
        if math.isnan(value) or value == -math.inf:
            raise ValueError("snr_db must be a real number or +inf")
        return value

    @property
    def sigma_n_sq(self) -> float:
        from .sensing import snr_to_noise_variance
        return snr_to_noise_variance(self.snr_db, self.es)

    @classmethod
    def noiseless(cls) -> "NoiseModel":
        return cls(snr_db=math.inf)


class MeasurementSet(BaseModel):
    """Observations y = X h + z together with what produced them."""
    model_config = ARRAY_CONFIG

    observations: np.ndarray
    signal: SparseSignal
    ensemble: SensingEnsemble
    noise: NoiseModel
    seed: Optional[int] = None

    @field_validator("observations", mode="before")
    @classmethod
    def _coerce_observations(cls, value):
        array = _frozen_array(value)
        if array.ndim != 1:
            raise ValueError("observations must be a 1-D vector")
        return array

    @model_validator(mode="after")
    def _check_lengths(self):
        if self.observations.size != self.ensemble.m_rows:
            raise ValueError(
                f"{self.observations.size} observations for {self.ensemble.m_rows} sensing rows"
            )
        return self

    @property
    def m_rows(self) -> int:
        return int(self.observations.size)


# ---------------------------------------------------------------------------
# Adaptive filter
# ---------------------------------------------------------------------------

class FilterParams(BaseModel):
    """RZA-NLMF hyperparameters."""
    model_config = ConfigDict(frozen=True)

    mu_iss: float = Field(default=config.MU_ISS, gt=0, description="Initial step-size")
    lambda_ass: float = Field(default=config.LAMBDA_ASS, ge=0, description="Regularization parameter")
    epsilon: float = Field(default=config.EPSILON, gt=0, description="Reweighted factor")
    rho: Optional[float] = Field(default=None, ge=0, description="Explicit attractor gain")
    rho_rule: RhoRule = RhoRule.GRADIENT
    zeta: float = Field(default=config.ZETA, ge=0, description="Stop tolerance on the update norm")
    n_max: int = Field(default=config.N_MAX, ge=1, description="Maximum number of updates")

    @property
    def effective_rho(self) -> float:
        if self.rho is not None:
            return self.rho
        if self.rho_rule is RhoRule.PRINTED:
            return self.mu_iss * self.lambda_ass / self.epsilon
        return self.mu_iss * self.lambda_ass * self.epsilon


class FilterState(BaseModel):
    """Estimate h~(n) and the quantities of the last update."""
    model_config = ARRAY_CONFIG

    estimate: np.ndarray
    iteration: int = Field(default=0, ge=0)
    last_error: float = 0.0
    last_step: float = 0.0

    @field_validator("estimate", mode="before")
    @classmethod
    def _coerce_estimate(cls, value):
        array = _frozen_array(value)
        if array.ndim != 1:
            raise ValueError("estimate must be a 1-D vector")
        if not np.all(np.isfinite(array)):
            raise ValueError("estimate must be finite")
        return array

    @classmethod
    def initial(cls, n_dim: int) -> "FilterState":
        return cls(estimate=np.zeros(n_dim))


# ---------------------------------------------------------------------------
# Baselines
# ---------------------------------------------------------------------------

class BpdnConfig(BaseModel):
    """Proximal-gradient BPDN settings."""
    model_config = ConfigDict(frozen=True)

    lambda_nss: Optional[float] = Field(default=None, ge=0, description="None selects sigma_n*sqrt(2 ln N)")
    max_iters: int = Field(default=config.BPDN_MAX_ITERS, ge=1)
    tolerance: float = Field(default=config.BPDN_TOLERANCE, ge=0, description="Relative objective change")
    power_iters: int = Field(default=1000, ge=1, description="Power iterations for the Lipschitz constant")


class OmpConfig(BaseModel):
    """Orthogonal matching pursuit settings."""
    model_config = ConfigDict(frozen=True)

    k_target: Optional[int] = Field(default=None, ge=1, description="None selects the true K when known")
    residual_tol: float = Field(default=config.OMP_RESIDUAL_TOL, ge=0)


class RecoveryResult(BaseModel):
    """Output of a batch sparse solver."""
    model_config = ARRAY_CONFIG

    estimate: np.ndarray
    support: Tuple[int, ...] = ()
    iterations: int = 0
    converged: bool = True
    rank_deficient: bool = False
    residual_norm: float = 0.0
    objective_history: Tuple[float, ...] = ()

    @field_validator("estimate", mode="before")
    @classmethod
    def _coerce_estimate(cls, value):
        return _frozen_array(value)


# ---------------------------------------------------------------------------
# Analysis
# ---------------------------------------------------------------------------

class CrlbInputs(BaseModel):
    """Quantities feeding the closed-form MSE expressions."""
    model_config = ConfigDict(frozen=True)

    n_dim: int = Field(ge=1)
    k_sparsity: int = Field(ge=0)
    sigma_n_sq: float = Field(ge=0)
    sigma_sq: float = Field(default=config.SIGMA_SQ, gt=0)
    mu_iss: float = Field(default=config.MU_ISS, gt=0)
    rho: float = Field(default=0.0, ge=0)

    @model_validator(mode="after")
    def _check_sparsity(self):
        if self.k_sparsity > self.n_dim:
            raise ValueError("k_sparsity must not exceed n_dim")
        return self


class MsdCoefficients(BaseModel):
    """Coefficients of the cubic MSD recursion b(n+1) = a1 b + a2 b^2 + a3 b^3 + c."""
    model_config = ConfigDict(frozen=True)

    linear: float
    quadratic: float
    cubic: float
    drive: float


class MsdTrajectory(BaseModel):
    """Predicted mean-square deviation b(0..T)."""
    model_config = ConfigDict(frozen=True)

    values: Tuple[float, ...]

    @field_validator("values")
    @classmethod
    def _check_finite(cls, value):
        if not value:
            raise ValueError("trajectory must not be empty")
        if not all(math.isfinite(v) for v in value):
            raise ValueError("trajectory entries must be finite")
        return value

    @property
    def final(self) -> float:
        return self.values[-1]


class CrlbAssResult(BaseModel):
    """Steady-state MSD prediction with its validity flag."""
    model_config = ConfigDict(frozen=True)

    value: float
    valid: bool
    linear_coefficient: float


# ---------------------------------------------------------------------------
# Harness
# ---------------------------------------------------------------------------

class ExperimentPoint(BaseModel):
    """One (solver, K, SNR, epsilon) point with everything needed to run a trial."""
    model_config = ConfigDict(frozen=True)

    solver: Solver
    k: int = Field(ge=1)
    snr_db: float
    epsilon: float = Field(description="nan for solvers that ignore it")
    n_dim: int = Field(default=config.N_DIM, ge=1)
    m_meas: int = Field(default=config.M_MEAS, ge=1)
    sigma_sq: float = Field(default=config.SIGMA_SQ, gt=0)
    mu_iss: float = Field(default=config.MU_ISS, gt=0)
    lambda_ass: float = Field(default=config.LAMBDA_ASS, ge=0)
    rho: Optional[float] = Field(default=None, ge=0)
    rho_rule: RhoRule = RhoRule.GRADIENT
    zeta: float = Field(default=config.ZETA, ge=0)
    n_max: int = Field(default=config.N_MAX, ge=1)
    bpdn_lambda: Optional[float] = Field(default=None, ge=0)
    bpdn_max_iters: int = Field(default=config.BPDN_MAX_ITERS, ge=1)
    omp_k_target: Optional[int] = Field(default=None, ge=1)

    @model_validator(mode="after")
    def _check_point(self):
        if self.k > self.n_dim:
            raise ValueError("k must not exceed n_dim")
        if self.solver.uses_epsilon and not (self.epsilon > 0):
            raise ValueError("rza-nlmf requires a positive epsilon")
        return self

    def filter_params(self) -> FilterParams:
        rho = self.rho
        if self.solver is Solver.NLMF:
            rho = 0.0
        return FilterParams(
            mu_iss=self.mu_iss,
            lambda_ass=self.lambda_ass,
            epsilon=self.epsilon if self.solver.uses_epsilon else config.EPSILON,
            rho=rho,
            rho_rule=self.rho_rule,
            zeta=self.zeta,
            n_max=self.n_max,
        )


class TrialResult(BaseModel):
    """MSE trace of one trial (length 1 for batch solvers)."""
    model_config = ARRAY_CONFIG

    trial_index: int
    mse: np.ndarray
    failed: bool = False
    failed_iteration: Optional[int] = None
    error_message: Optional[str] = None

    @field_validator("mse", mode="before")
    @classmethod
    def _coerce_mse(cls, value):
        return _frozen_array(value)


class CurveMetadata(BaseModel):
    """Everything needed to rerun a curve in isolation."""
    model_config = ConfigDict(frozen=True)

    solver: Solver
    k: int
    snr_db: float
    epsilon: float
    trials: int = Field(ge=1)
    seed: Optional[int] = None
    failed_trials: int = Field(default=0, ge=0)


class MseCurve(BaseModel):
    """Averaged MSE per iteration; iteration -1 marks a batch solver's final value."""
    model_config = ARRAY_CONFIG

    iterations: np.ndarray
    mse: np.ndarray
    metadata: CurveMetadata

    @field_validator("iterations", mode="before")
    @classmethod
    def _coerce_iterations(cls, value):
        return _frozen_array(value, dtype=np.int64)

    @field_validator("mse", mode="before")
    @classmethod
    def _coerce_mse(cls, value):
        return _frozen_array(value)

    @model_validator(mode="after")
    def _check_curve(self):
        if self.iterations.shape != self.mse.shape or self.mse.ndim != 1:
            raise ValueError("iterations and mse must be 1-D and of equal length")
        if np.any(self.mse < 0):
            raise ValueError("mse entries must be non-negative")
        return self

    @property
    def final_mse(self) -> float:
        if self.mse.size == 0:
            return math.nan
        return float(self.mse[-1])


class BoundRow(BaseModel):
    """Closed-form bounds at one (K, SNR, epsilon) point."""
    model_config = ConfigDict(frozen=True)

    k: int
    snr_db: float
    epsilon: float = Field(description="Reweighted factor that sets rho in crlb_ass")
    sigma_n_sq: float
    crlb_nss: float
    crlb_ass: float
    crlb_ass_valid: bool


class ComparisonRow(BaseModel):
    """Final MSE of one curve next to the bounds at its (K, SNR)."""
    model_config = ConfigDict(frozen=True)

    solver: Solver
    k: int
    snr_db: float
    epsilon: float
    final_mse: float
    final_mse_db: float
    crlb_nss: float
    crlb_ass: float
    crlb_ass_valid: bool
    bound_epsilon: float = Field(description="Epsilon crlb_ass was evaluated at")


class EpsilonSelection(BaseModel):
    """Reweighted factor chosen per point and the most robust single choice."""
    model_config = ConfigDict(frozen=True)

    best_by_point: Dict[Tuple[int, float], float]
    gap_db_by_epsilon: Dict[float, float]
    robust_epsilon: float
    robust_gap_db: float


class SweepSummary(BaseModel):
    """Bookkeeping of one sweep run."""
    points: int = 0
    trials: int = 0
    failed_trials: int = 0
    rows_written: int = 0
    wall_time_s: float = 0.0
    peak_memory_mb: float = 0.0
    output: Optional[Path] = None
    errors: List[str] = Field(default_factory=list)


class ExperimentConfig(BaseModel):
    """Declarative Monte Carlo experiment."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    n_dim: int = Field(default=config.N_DIM, ge=1)
    m_meas: int = Field(default=config.M_MEAS, ge=1)
    k_list: List[int] = Field(default_factory=lambda: list(config.K_LIST))
    snr_list: List[float] = Field(default_factory=lambda: list(config.SNR_LIST))
    epsilon_list: List[float] = Field(default_factory=lambda: [config.EPSILON])
    trials: int = Field(default=config.TRIALS, ge=1)
    seed: int = Field(default=config.SEED, ge=0)
    solvers: List[Solver] = Field(
        default_factory=lambda: [Solver.RZA_NLMF, Solver.OMP, Solver.BPDN]
    )
    sigma_sq: float = Field(default=config.SIGMA_SQ, gt=0)
    mu_iss: float = Field(default=config.MU_ISS, gt=0)
    lambda_ass: float = Field(default=config.LAMBDA_ASS, ge=0)
    rho: Optional[float] = Field(default=None, ge=0)
    rho_rule: RhoRule = RhoRule.GRADIENT
    zeta: float = Field(default=config.ZETA, ge=0)
    n_max: int = Field(default=config.N_MAX, ge=1)
    bpdn_lambda: Optional[float] = Field(default=None, ge=0)
    bpdn_max_iters: int = Field(default=config.BPDN_MAX_ITERS, ge=1)
    omp_k_target: Optional[int] = Field(default=None, ge=1)
    decimate: int = Field(default=config.DECIMATE, ge=1, description="1 keeps every iteration")
    workers: int = Field(default=config.WORKERS, ge=1)
    output: Path = Field(default=Path(config.OUTPUT_PATH))

    @field_validator("k_list", "snr_list", "epsilon_list", "solvers", mode="before")
    @classmethod
    def _parse_lists(cls, value):
        return _split_list(value)

    @field_validator("rho", "bpdn_lambda", "omp_k_target", mode="before")
    @classmethod
    def _empty_is_unset(cls, value):
        if isinstance(value, str) and not value.strip():
            return None
        return value

    @field_validator("k_list", "snr_list", "epsilon_list", "solvers")
    @classmethod
    def _non_empty(cls, value):
        if not value:
            raise ValueError("list must not be empty")
        return value

    @field_validator("epsilon_list")
    @classmethod
    def _positive_epsilons(cls, value):
        if any(not (eps > 0) for eps in value):
            raise ValueError("reweighted factors must be positive")
        return value

    @model_validator(mode="after")
    def _check_dimensions(self):
        bad = [k for k in self.k_list if k < 1 or k > self.n_dim]
        if bad:
            raise ValueError(f"sparsity levels must lie in [1, n_dim]: {bad}")
        if any(math.isnan(s) or s == -math.inf for s in self.snr_list):
            raise ValueError("snr values must be real numbers or +inf")
        return self

    @classmethod
    def from_file(cls, path: Optional[Path] = None, **overrides: Any) -> "ExperimentConfig":
        """Load a ``key = value`` file (or only defaults when path is None); overrides win."""
        raw: Dict[str, Any] = dict(config.load_config_file(path)) if path is not None else {}
        unknown = set(raw) - set(cls.model_fields)
        if unknown:
            raise ConfigError(f"Unknown config keys in {path}", keys=unknown)
        raw.update({key: value for key, value in overrides.items() if value is not None})
        try:
            return cls.model_validate(raw)
        except ValueError as e:
            raise ConfigError(f"Invalid config {path or '(defaults)'}: {e}") from e

    def points(self) -> List[ExperimentPoint]:
        """Cartesian product of (solver, K, SNR, epsilon); epsilon-free solvers run once."""
        shared = dict(
            n_dim=self.n_dim,
            m_meas=self.m_meas,
            sigma_sq=self.sigma_sq,
            mu_iss=self.mu_iss,
            lambda_ass=self.lambda_ass,
            rho=self.rho,
            rho_rule=self.rho_rule,
            zeta=self.zeta,
            n_max=self.n_max,
            bpdn_lambda=self.bpdn_lambda,
            bpdn_max_iters=self.bpdn_max_iters,
            omp_k_target=self.omp_k_target,
        )
        points = []
        for solver in self.solvers:
            epsilons = self.epsilon_list if solver.uses_epsilon else [math.nan]
            for k in self.k_list:
                for snr_db in self.snr_list:
                    for epsilon in epsilons:
                        points.append(ExperimentPoint(
                            solver=solver, k=k, snr_db=snr_db, epsilon=epsilon, **shared
                        ))
        return points
