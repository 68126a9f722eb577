from .convergence import convergence_experiment, step_grid
from .covariance import covariance_experiment
from .ensemble import EnsembleSpec, chunk_indices, parallel_map, run_ensemble
from .phenomena import (
    DivergenceMap,
    cellular_experiment,
    divergence_experiment,
    divergence_map,
    turbophoresis_experiment,
    vortex_experiment,
)
from .regimes import regime_separation_experiment
from .report import ExperimentReport, ReportRow, config_hash, standard_error

__all__ = [
    "DivergenceMap",
    "EnsembleSpec",
    "ExperimentReport",
    "ReportRow",
    "cellular_experiment",
    "chunk_indices",
    "config_hash",
    "convergence_experiment",
    "covariance_experiment",
    "divergence_experiment",
    "divergence_map",
    "parallel_map",
    "regime_separation_experiment",
    "run_ensemble",
    "standard_error",
    "step_grid",
    "turbophoresis_experiment",
    "vortex_experiment",
]
