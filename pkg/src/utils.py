"""
Utility functions shared by the experiment runner and the CLI.
"""

import csv
import os
import sys
import time
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
import psutil
from loguru import logger

from .exceptions import InvalidArgumentError, OutputPathError
from .models import CurveMetadata, MseCurve, Solver

CURVE_HEADER = ["solver", "k", "snr_db", "epsilon", "trial_count", "seed", "iteration", "mse"]
FINAL_ITERATION = -1


def setup_logging(level: str = "INFO", log_file: Optional[Path] = None) -> None:
    """Setup logging configuration with rich formatting."""
    logger.remove()

    logger.add(
        sys.stderr,
        level=level,
        format="<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | <cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - <level>{message}</level>",
        colorize=True
    )

    if log_file:
        logger.add(
            log_file,
            level=level,
            format="{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {name}:{function}:{line} - {message}",
            rotation="10 MB",
            retention="7 days"
        )


def get_memory_usage() -> float:
    """Get current memory usage in MB."""
    process = psutil.Process(os.getpid())
    return process.memory_info().rss / 1024 / 1024


def ensure_directory(path: Path) -> None:
    """Ensure a directory exists, creating it if necessary."""
    path.mkdir(parents=True, exist_ok=True)


def check_output_path(path: Path) -> Path:
    """Make sure ``path`` can be created as a file; raises OutputPathError otherwise."""
    path = Path(path)
    if path.is_dir():
        raise OutputPathError(path, "path is a directory")
    try:
        ensure_directory(path.parent)
    except OSError as e:
        raise OutputPathError(path, str(e)) from e
    if not os.access(path.parent, os.W_OK):
        raise OutputPathError(path, "parent directory is not writable")
    if path.exists() and not os.access(path, os.W_OK):
        raise OutputPathError(path, "file is not writable")
    return path


def format_float(value: float) -> str:
    """17 significant digits, enough for an exact round-trip."""
    return format(float(value), ".17g")


def decimate_indices(length: int, step: int) -> np.ndarray:
    """Every ``step``-th index of a curve, always ending with the last one."""
    if step < 1:
        raise InvalidArgumentError(f"decimation step must be positive, got {step}")
    if length <= 0:
        return np.zeros(0, dtype=np.int64)
    indices = np.arange(0, length, step, dtype=np.int64)
    if indices[-1] != length - 1:
        indices = np.append(indices, length - 1)
    return indices


def _write_curve_rows(f, curves: Iterable[MseCurve], decimate: int) -> int:
    writer = csv.writer(f, lineterminator="\n")
    writer.writerow(CURVE_HEADER)
    rows = 0
    for curve in curves:
        meta = curve.metadata
        prefix = [
            meta.solver.value,
            str(meta.k),
            format_float(meta.snr_db),
            format_float(meta.epsilon),
            str(meta.trials),
            "" if meta.seed is None else str(meta.seed),
        ]
        for i in decimate_indices(curve.mse.size, decimate):
            writer.writerow(prefix + [str(int(curve.iterations[i])), format_float(curve.mse[i])])
            rows += 1
    return rows


def write_curves_csv(curves: Iterable[MseCurve], path: Path, decimate: int = 1) -> int:
    """Write curves in long format, one row per (curve, kept iteration). Returns the row count."""
    path = check_output_path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            return _write_curve_rows(f, curves, decimate)
    except OSError as e:
        raise OutputPathError(path, e.strerror or str(e)) from e


def read_curves_csv(path: Path) -> List[MseCurve]:
    """Inverse of write_curves_csv; rows are grouped by their metadata columns in file order."""
    path = Path(path)
    if not path.is_file():
        raise InvalidArgumentError(f"Curve file does not exist: {path}")

    groups: Dict[Tuple[str, ...], Tuple[List[int], List[float]]] = {}
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != CURVE_HEADER:
            raise InvalidArgumentError(f"Unexpected curve header in {path}: {header}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CURVE_HEADER):
                raise InvalidArgumentError(f"{path}:{line_no}: expected {len(CURVE_HEADER)} columns")
            iterations, values = groups.setdefault(tuple(row[:6]), ([], []))
            iterations.append(int(row[6]))
            values.append(float(row[7]))

    curves = []
    for key, (iterations, values) in groups.items():
        solver, k, snr_db, epsilon, trials, seed = key
        try:
            metadata = CurveMetadata(
                solver=Solver(solver),
                k=int(k),
                snr_db=float(snr_db),
                epsilon=float(epsilon),
                trials=int(trials),
                seed=int(seed) if seed else None,
            )
            curves.append(MseCurve(iterations=iterations, mse=values, metadata=metadata))
        except ValueError as e:
            raise InvalidArgumentError(f"Malformed curve rows in {path}: {e}") from e
    return curves


class Timer:
    """Context manager for timing operations."""

    def __init__(self, name: str = "operation", level: str = "INFO"):
        self.name = name
        self.level = level
        self.start_time = None
        self.end_time = None

    def __enter__(self):
        self.start_time = time.perf_counter()
        logger.log(self.level, f"Starting {self.name}")
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.end_time = time.perf_counter()
        logger.log(self.level, f"Completed {self.name} in {self.duration:.2f}s")

    @property
    def duration(self) -> float:
        """Get the duration in seconds."""
        if self.start_time is None:
            return 0.0
        end = self.end_time or time.perf_counter()
        return end - self.start_time
