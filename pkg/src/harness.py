"""
Seeded Monte Carlo experiment runner.

Every trial draws its (h, X, z) from ``trial_streams(seed, trial_index)``, so the same trial
index sees the same data at every sweep point and results never depend on execution order.
"""

import math
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from . import config
from .analysis import crlb_ass, crlb_nss, mse_to_db
from .baselines import bpdn_solve, omp_solve
from .exceptions import FilterDivergenceError, InvalidArgumentError, SingularityError
from .filters import run_ass
from .models import (
    BoundRow, BpdnConfig, ComparisonRow, CrlbInputs, CurveMetadata, EpsilonSelection,
    ExperimentConfig, ExperimentPoint, FilterParams, MseCurve, NoiseModel, OmpConfig, Solver,
    SweepSummary, TrialResult
)
from .sensing import (
    generate_sensing_matrix, generate_sparse_signal, measure, snr_to_noise_variance, trial_streams
)
from .utils import FINAL_ITERATION, Timer, check_output_path, get_memory_usage, write_curves_csv

PointCallback = Callable[[ExperimentPoint, MseCurve], None]


def run_trial(point: ExperimentPoint, root_seed: int, trial_index: int) -> TrialResult:
    """Run one seeded trial: MSE trace for adaptive solvers, a single final MSE otherwise."""
    streams = trial_streams(root_seed, trial_index)
    signal = generate_sparse_signal(point.n_dim, point.k, streams.signal)
    ensemble = generate_sensing_matrix(point.m_meas, point.n_dim, point.sigma_sq, streams.matrix)
    noise = NoiseModel(snr_db=point.snr_db, es=config.SIGNAL_POWER)
    measurements = measure(signal, ensemble, noise, streams.noise, seed=root_seed)

    if point.solver.is_adaptive:
        try:
            _, curve = run_ass(measurements, ensemble, point.filter_params(), truth=signal)
        except FilterDivergenceError as e:
            logger.warning(
                f"Trial {trial_index} of {point.solver.value} (K={point.k}, SNR={point.snr_db}) "
                f"diverged at iteration {e.iteration}"
            )
            return TrialResult(
                trial_index=trial_index,
                mse=np.zeros(0),
                failed=True,
                failed_iteration=e.iteration,
                error_message=str(e),
            )
        return TrialResult(trial_index=trial_index, mse=curve.mse)

    if point.solver is Solver.OMP:
        result = omp_solve(ensemble, measurements, OmpConfig(k_target=point.omp_k_target))
    else:
        result = bpdn_solve(
            ensemble,
            measurements,
            BpdnConfig(lambda_nss=point.bpdn_lambda, max_iters=point.bpdn_max_iters),
        )
    error = signal.coefficients - result.estimate
    return TrialResult(trial_index=trial_index, mse=np.array([np.dot(error, error)]))


def average_trials(point: ExperimentPoint, trials: Sequence[TrialResult], root_seed: int) -> MseCurve:
    """Average successful trials in trial-index order; early-stopped traces hold their last value."""
    ordered = sorted(trials, key=lambda t: t.trial_index)
    succeeded = [t for t in ordered if not t.failed]
    metadata = CurveMetadata(
        solver=point.solver,
        k=point.k,
        snr_db=point.snr_db,
        epsilon=point.epsilon,
        trials=len(ordered),
        seed=root_seed,
        failed_trials=len(ordered) - len(succeeded),
    )

    if not succeeded:
        return MseCurve(iterations=np.zeros(0), mse=np.zeros(0), metadata=metadata)

    if point.solver.is_adaptive:
        length = point.n_max + 1
        padded = np.stack([np.pad(t.mse, (0, length - t.mse.size), mode="edge") for t in succeeded])
        return MseCurve(iterations=np.arange(length), mse=padded.mean(axis=0), metadata=metadata)

    finals = np.array([t.mse[-1] for t in succeeded])
    return MseCurve(iterations=[FINAL_ITERATION], mse=[finals.mean()], metadata=metadata)


class ExperimentRunner:
    """Runs every point of an ExperimentConfig and keeps sweep statistics."""

    def __init__(self, cfg: ExperimentConfig, workers: Optional[int] = None):
        self.cfg = cfg
        self.workers = workers or cfg.workers
        self.peak_memory = 0.0
        self.stats = {
            "points": 0,
            "trials": 0,
            "failed": 0,
            "errors": []
        }

    def run_point(self, point: ExperimentPoint, executor: Optional[ProcessPoolExecutor] = None) -> MseCurve:
        indices = range(self.cfg.trials)
        if executor is None:
            results = [run_trial(point, self.cfg.seed, i) for i in indices]
        else:
            # map preserves input order, so reduction is independent of completion order
            n = self.cfg.trials
            results = list(executor.map(run_trial, [point] * n, [self.cfg.seed] * n, indices))

        curve = average_trials(point, results, self.cfg.seed)
        failed = curve.metadata.failed_trials
        self.stats["points"] += 1
        self.stats["trials"] += len(results)
        self.stats["failed"] += failed
        self.stats["errors"].extend(
            f"{point.solver.value} K={point.k} SNR={point.snr_db} trial {t.trial_index}: {t.error_message}"
            for t in results if t.failed
        )
        self.peak_memory = max(self.peak_memory, get_memory_usage())

        logger.info(
            f"{point.solver.value} K={point.k} SNR={point.snr_db} eps={point.epsilon}: "
            f"final MSE {curve.final_mse:.6g} ({failed} failed of {len(results)})"
        )
        return curve

    def run(self, on_point: Optional[PointCallback] = None) -> List[MseCurve]:
        points = self.cfg.points()
        curves = []
        if self.workers > 1:
            with ProcessPoolExecutor(max_workers=self.workers) as executor:
                for point in points:
                    curve = self.run_point(point, executor)
                    curves.append(curve)
                    if on_point:
                        on_point(point, curve)
        else:
            for point in points:
                curve = self.run_point(point)
                curves.append(curve)
                if on_point:
                    on_point(point, curve)
        return curves

    def sweep(self, decimate: Optional[int] = None, on_point: Optional[PointCallback] = None) -> Tuple[List[MseCurve], SweepSummary]:
        """Check the output path, run every point and write the CSV."""
        output = check_output_path(self.cfg.output)
        started = time.perf_counter()

        with Timer(f"sweep of {len(self.cfg.points())} points x {self.cfg.trials} trials"):
            curves = self.run(on_point)

        with Timer("CSV emission", level="DEBUG"):
            rows = write_curves_csv(curves, output, decimate=decimate or self.cfg.decimate)

        summary = SweepSummary(
            points=self.stats["points"],
            trials=self.stats["trials"],
            failed_trials=self.stats["failed"],
            rows_written=rows,
            wall_time_s=time.perf_counter() - started,
            peak_memory_mb=self.peak_memory,
            output=output,
            errors=list(self.stats["errors"]),
        )
        return curves, summary


def run_sweep(cfg: ExperimentConfig, workers: Optional[int] = None, decimate: Optional[int] = None) -> List[MseCurve]:
    """Run the Cartesian product of sweep points and write the curves to ``cfg.output``."""
    curves, _ = ExperimentRunner(cfg, workers).sweep(decimate=decimate)
    return curves


def compute_bounds(cfg: ExperimentConfig) -> List[BoundRow]:
    """crlb_nss and crlb_ass for every (K, SNR, epsilon) of the config."""
    rows = []
    for epsilon in cfg.epsilon_list:
        params = FilterParams(
            mu_iss=cfg.mu_iss,
            lambda_ass=cfg.lambda_ass,
            epsilon=epsilon,
            rho=cfg.rho,
            rho_rule=cfg.rho_rule,
        )
        for k in cfg.k_list:
            for snr_db in cfg.snr_list:
                sigma_n_sq = snr_to_noise_variance(snr_db, config.SIGNAL_POWER)
                inp = CrlbInputs(
                    n_dim=cfg.n_dim,
                    k_sparsity=k,
                    sigma_n_sq=sigma_n_sq,
                    sigma_sq=cfg.sigma_sq,
                    mu_iss=cfg.mu_iss,
                    rho=params.effective_rho,
                )
                try:
                    ass = crlb_ass(inp)
                    ass_value, ass_valid = ass.value, ass.valid
                except SingularityError as e:
                    logger.warning(f"crlb_ass undefined at K={k}, SNR={snr_db}, eps={epsilon}: {e}")
                    ass_value, ass_valid = math.nan, False
                rows.append(BoundRow(
                    k=k,
                    snr_db=snr_db,
                    epsilon=epsilon,
                    sigma_n_sq=sigma_n_sq,
                    crlb_nss=crlb_nss(inp),
                    crlb_ass=ass_value,
                    crlb_ass_valid=ass_valid,
                ))
    return rows


def _bound_label(k: int, snr_db: float, epsilon: Optional[float]) -> str:
    if epsilon is None:
        return f"(K={k}, SNR={snr_db})"
    return f"(K={k}, SNR={snr_db}, eps={epsilon})"


def compare_with_bounds(curves: Iterable[MseCurve], bounds: Iterable[BoundRow]) -> List[ComparisonRow]:
    """Join each curve's final MSE with the bounds at its (K, SNR).

    rza-nlmf curves take crlb_ass at their own epsilon; other solvers take the first
    epsilon listed for their (K, SNR), reported as ``bound_epsilon``.
    """
    curves = list(curves)
    by_epsilon: Dict[Tuple[int, float, float], BoundRow] = {}
    by_point: Dict[Tuple[int, float], BoundRow] = {}
    for bound in bounds:
        by_epsilon[(bound.k, bound.snr_db, bound.epsilon)] = bound
        by_point.setdefault((bound.k, bound.snr_db), bound)

    def lookup(meta: CurveMetadata) -> Optional[BoundRow]:
        if meta.solver.uses_epsilon:
            return by_epsilon.get((meta.k, meta.snr_db, meta.epsilon))
        return by_point.get((meta.k, meta.snr_db))

    missing = sorted({
        _bound_label(c.metadata.k, c.metadata.snr_db, c.metadata.epsilon if c.metadata.solver.uses_epsilon else None)
        for c in curves if lookup(c.metadata) is None
    })
    if missing:
        raise InvalidArgumentError(f"No bounds for curve keys: {', '.join(missing)}")

    rows = []
    for curve in curves:
        meta = curve.metadata
        bound = lookup(meta)
        rows.append(ComparisonRow(
            solver=meta.solver,
            k=meta.k,
            snr_db=meta.snr_db,
            epsilon=meta.epsilon,
            final_mse=curve.final_mse,
            final_mse_db=mse_to_db(curve.final_mse),
            crlb_nss=bound.crlb_nss,
            crlb_ass=bound.crlb_ass,
            crlb_ass_valid=bound.crlb_ass_valid,
            bound_epsilon=bound.epsilon,
        ))
    return rows


def _gap_db(value: float, best: float) -> float:
    if value == best:
        return 0.0
    return mse_to_db(value) - mse_to_db(best)


def select_reweighted_factor(curves: Iterable[MseCurve]) -> EpsilonSelection:
    """Best epsilon per (K, SNR) and the epsilon with the smallest worst-case gap to it."""
    finals: Dict[Tuple[int, float], Dict[float, float]] = {}
    for curve in curves:
        meta = curve.metadata
        if not meta.solver.uses_epsilon or not math.isfinite(curve.final_mse):
            continue
        finals.setdefault((meta.k, meta.snr_db), {})[meta.epsilon] = curve.final_mse

    if not finals:
        raise InvalidArgumentError("no rza-nlmf curves with a finite final MSE to select from")

    best_by_point = {}
    for key, by_eps in finals.items():
        best_by_point[key] = min(sorted(by_eps), key=lambda eps: by_eps[eps])

    epsilons = sorted({eps for by_eps in finals.values() for eps in by_eps})
    gap_db_by_epsilon = {}
    for eps in epsilons:
        gaps = [
            _gap_db(by_eps[eps], by_eps[best_by_point[key]]) if eps in by_eps else math.inf
            for key, by_eps in finals.items()
        ]
        gap_db_by_epsilon[eps] = max(gaps)

    robust = min(epsilons, key=lambda eps: gap_db_by_epsilon[eps])
    return EpsilonSelection(
        best_by_point=best_by_point,
        gap_db_by_epsilon=gap_db_by_epsilon,
        robust_epsilon=robust,
        robust_gap_db=gap_db_by_epsilon[robust],
    )
