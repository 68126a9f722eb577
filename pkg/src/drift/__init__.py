from .inertial import DriftProvider, inertial_drift, scalar_drift
from .matrices import (
    DriftMatrices,
    MixingRate,
    assemble_Q_alpha,
    compute_drift_matrices,
    compute_L_alpha,
    compute_M,
    compute_N_alpha,
    format_alpha,
    parse_alpha,
)
from .turbulence import (
    CellularDiagnostics,
    TurbulenceDriftParts,
    cellular_diagnostics,
    drift_divergence,
    turbophoretic_alignment,
    turbulence_drift,
    turbulence_drift_parts,
)

__all__ = [
    "CellularDiagnostics",
    "DriftMatrices",
    "DriftProvider",
    "MixingRate",
    "TurbulenceDriftParts",
    "assemble_Q_alpha",
    "cellular_diagnostics",
    "compute_L_alpha",
    "compute_M",
    "compute_N_alpha",
    "compute_drift_matrices",
    "drift_divergence",
    "format_alpha",
    "inertial_drift",
    "parse_alpha",
    "scalar_drift",
    "turbophoretic_alignment",
    "turbulence_drift",
    "turbulence_drift_parts",
]
