"""Drift of inertial particles in the synthetic turbulence models.

The limit equation in Stratonovich form reads

    dx = u(x) dt + sum_k xi_k(x) o dw_k - b_alpha(x) dt,
    b_alpha = (1/2) alpha / (c0 k_T + alpha) (sum_k D xi_k xi_k + C grad log k_T),

so -b_alpha equals f_alpha - f_0 of the scalar-friction drift.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..common.config import MODEL_DEFAULTS
from ..models.turbulence import CellularModel, TurbulenceModel
from .matrices import parse_alpha


@dataclass(frozen=True, eq=False)
class TurbulenceDriftParts:
    """Pieces of -b_alpha.

    Attributes:
        prefactor (np.ndarray): (1/2) alpha / (c0 k_T + alpha), shape (...,).
        centrifugal (np.ndarray): sum_k D xi_k xi_k.
        turbophoretic (np.ndarray): C grad log k_T.
        total (np.ndarray): -prefactor * (centrifugal + turbophoretic).
    """

    prefactor: np.ndarray
    centrifugal: np.ndarray
    turbophoretic: np.ndarray
    total: np.ndarray


def drift_prefactor(friction: np.ndarray, alpha: float) -> np.ndarray:
    if alpha == 0.0:
        return np.zeros_like(friction)
    if math.isinf(alpha):
        return np.full_like(friction, 0.5)
    return 0.5 * alpha / (friction + alpha)


def turbulence_drift_parts(turbulence: TurbulenceModel, alpha, x) -> TurbulenceDriftParts:
    alpha = parse_alpha(alpha)
    x = turbulence.points(x)
    prefactor = drift_prefactor(turbulence.friction(x), alpha)
    centrifugal = turbulence.centrifugal(x)
    turbophoretic = np.einsum(
        "...ij,...j->...i", turbulence.correlation(x), turbulence.log_energy_grad(x)
    )
    total = -prefactor[..., None] * (centrifugal + turbophoretic)
    return TurbulenceDriftParts(prefactor, centrifugal, turbophoretic, total)


def turbulence_drift(turbulence: TurbulenceModel, alpha, x) -> np.ndarray:
    """Signed drift -b_alpha(x) entering the limit equation."""
    return turbulence_drift_parts(turbulence, alpha, x).total


def turbophoretic_alignment(turbulence: TurbulenceModel, x) -> np.ndarray:
    """Rayleigh quotient of C(x) along grad log k_T, relative to the top eigenvalue.

    Values near 1 mean the energy gradient lies along the principal axis of C,
    where the turbophoretic drift is amplified. Zero where the gradient vanishes.
    """
    x = turbulence.points(x)
    C = turbulence.correlation(x)
    g = turbulence.log_energy_grad(x)
    norm2 = np.sum(g**2, axis=-1)
    quotient = np.einsum("...i,...ij,...j->...", g, C, g)
    top = np.linalg.eigvalsh(C)[..., -1]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = quotient / (norm2 * top)
    return np.where((norm2 > 0.0) & (top > 0.0), ratio, 0.0)


@dataclass(frozen=True, eq=False)
class CellularDiagnostics:
    psi: np.ndarray
    grad_psi_dot_xi: np.ndarray
    grad_psi_dot_Dxixi: np.ndarray
    bracket: np.ndarray
    psi_rate: np.ndarray
    div_minus_b: np.ndarray


def cellular_diagnostics(model: CellularModel, alpha, x) -> CellularDiagnostics:
    """Level-set identities of the cellular flow.

    grad psi . xi vanishes, grad psi . D xi xi = (k1 k2)^2 psi (cos^2(k1 x1) +
    sin^2(k2 x2)), so along the limit dynamics psi decays at the rate
    ``psi_rate`` = -prefactor (k1 k2)^2 bracket psi. The drift divergence is

        div(-b_alpha) = -(alpha / (lambda + alpha)) (k1 k2)^2 (sin^2(k2 x2) - sin^2(k1 x1)).
    """
    alpha = parse_alpha(alpha)
    x = model.points(x)
    grad_psi = model.grad_psi(x)
    psi = model.psi(x)
    bracket = model.decay_bracket(x)
    prefactor = drift_prefactor(model.friction(x), alpha)
    k2 = (model.k1 * model.k2) ** 2
    s1 = np.sin(model.k1 * x[..., 0])
    s2 = np.sin(model.k2 * x[..., 1])
    return CellularDiagnostics(
        psi=psi,
        grad_psi_dot_xi=np.sum(grad_psi * model.fields(x)[..., 0], axis=-1),
        grad_psi_dot_Dxixi=np.sum(grad_psi * model.centrifugal(x), axis=-1),
        bracket=bracket,
        psi_rate=-prefactor * k2 * bracket * psi,
        div_minus_b=-2.0 * prefactor * k2 * (s2**2 - s1**2),
    )


def drift_divergence(turbulence: TurbulenceModel, alpha, x, step: Optional[float] = None) -> np.ndarray:
    """Central-difference divergence of -b_alpha."""
    x = turbulence.points(x)
    base = MODEL_DEFAULTS["fd_step"] if step is None else step
    h = base * (1.0 + np.linalg.norm(x, axis=-1))
    total = np.zeros(x.shape[:-1])
    for l in range(turbulence.dim):
        offset = np.zeros(turbulence.dim)
        offset[l] = 1.0
        shift = h[..., None] * offset
        plus = turbulence_drift(turbulence, alpha, x + shift)[..., l]
        minus = turbulence_drift(turbulence, alpha, x - shift)[..., l]
        total = total + (plus - minus) / (2.0 * h)
    return total
