#!/usr/bin/env python3
"""
Default simulation parameters and config-file parsing for Sparse Sense experiments.
"""

from pathlib import Path
from typing import Dict

from dotenv import dotenv_values

from .exceptions import ConfigError

# Problem dimensions
N_DIM = 40
M_MEAS = 20
K_LIST = [2, 6, 10]
SIGMA_SQ = 1.0  # per-entry variance of the sensing matrix
SIGNAL_POWER = 1.0  # E_s

# Noise sweep (dB)
SNR_LIST = [0.0, 3.0, 6.0, 9.0, 12.0]

# RZA-NLMF settings
MU_ISS = 1.5
LAMBDA_ASS = 5e-8
EPSILON = 2000.0
EPSILON_SWEEP = [2.0, 20.0, 200.0, 2000.0, 20000.0]
ZETA = 0.0  # run to N_MAX
N_MAX = 20000

# Baselines
BPDN_MAX_ITERS = 5000
BPDN_TOLERANCE = 1e-10
OMP_RESIDUAL_TOL = 1e-10

# Monte Carlo
TRIALS = 100
SEED = 0
WORKERS = 1
DECIMATE = 50  # keep every 50th iteration in CSV output
OUTPUT_PATH = "./results/curves.csv"

LOG_LEVEL = "INFO"  # DEBUG, INFO, WARNING, ERROR


def load_config_file(path: Path) -> Dict[str, str]:
    """Read a flat ``key = value`` config file into a string mapping."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Config file does not exist: {path}")

    values = dotenv_values(path)
    parsed = {}
    for key, value in values.items():
        # Bare keys without '=' come back as None
        if value is None:
            raise ConfigError(f"Config line has no value in {path}", keys=[key])
        parsed[key.strip()] = value.strip()
    return parsed
