from .expm import matrix_exponential
from .matrix_equations import (
    lyapunov_residual,
    solve_lyapunov,
    solve_sylvester,
    sylvester_residual,
)
from .spectrum import StabilityReport, as_matrix, spectral_abscissa, spectral_gap, stability_report

__all__ = [
    "StabilityReport",
    "as_matrix",
    "lyapunov_residual",
    "matrix_exponential",
    "solve_lyapunov",
    "solve_sylvester",
    "spectral_abscissa",
    "spectral_gap",
    "stability_report",
    "sylvester_residual",
]
