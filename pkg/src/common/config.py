import math
import os
from pathlib import Path

BASE_DIR = Path(__file__).parent.parent
OUTPUT_DIR = Path(os.getenv("INERTIAL_OUTPUT_DIR", "runs"))

LOG_LEVEL = os.getenv("INERTIAL_LOG_LEVEL", "INFO")
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

WORKERS = int(os.getenv("INERTIAL_WORKERS", "1"))
CHUNK_SIZE = int(os.getenv("INERTIAL_CHUNK_SIZE", "50"))

CSV_SCHEMA_VERSION = "inertial-data/1"

TOLERANCES = {
    "symmetry": 1e-10,
    "min_rcond": 1e-12,
    "psd_floor": -1e-12,
    "richardson_scale": 10.0,
    "divergence": 1e-8,
    "friction_slack": 1e-12,
}

SIM_DEFAULTS = {
    "T": 1.0,
    "dt": 1e-3,
    "epsilon": 0.05,
    "alpha": 1.0,
    "mu_rule": "alpha",
    "seed": 42,
    "resolution_factor": 5.0,
}

EXPERIMENT_DEFAULTS = {
    "n_paths": 200,
    "pre_dt_fraction": 1.0 / 20.0,
    "dt_limit": 1e-3,
    "eta": 0.25,
    "max_exceed_fraction": 0.1,
    "burn_in_mixing_times": 8.0,
    "min_burn_in_mixing_times": 4.0,
    "max_flagged_fraction": 0.01,
    "verdict_sigmas": 3.0,
    "flat_sigmas": 2.0,
    "checkpoints": 11,
}

MODEL_DEFAULTS = {
    "cutoff_radius": 10.0,
    "fd_step": 1e-5,
    "pipe_floor": 0.5,
    "pipe_peak": 1.5,
    "pipe_curvature": 1.0,
    "pipe_smoothing": 0.02,
}

ALPHA_TOKENS = {
    "inf": math.inf,
    "infinity": math.inf,
    "∞": math.inf,
}

OUTPUT_FILES = {
    "report": "report.json",
    "data": "data.csv",
    "config_echo": "config.echo.json",
}

EXIT_CODES = {
    "pass": 0,
    "error": 1,
    "verdict_fail": 2,
}
