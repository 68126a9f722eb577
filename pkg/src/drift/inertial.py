"""The inertial-Ito drift of the limit equation

    dx = [gamma^-1 b + f_alpha](x) dt + gamma^-1 sigma A^-1 B dw.
"""

import logging
import math
from typing import Dict, Optional, Tuple

import numpy as np

from ..common.errors import ClosedFormError, ConfigError
from ..models.base import CoefficientModel
from ..models.derivatives import DerivativeBundle
from ..models.noise import NoiseSpec
from ..models.scalar import ScalarFrictionModel
from .matrices import compute_drift_matrices, compute_M, parse_alpha

logger = logging.getLogger(__name__)


def inertial_drift(
    model: CoefficientModel,
    noise: NoiseSpec,
    alpha,
    x,
    derivatives: Optional[DerivativeBundle] = None,
    M: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Contract the derivative tensors against alpha N_alpha and A^-1 L_alpha^T.

    [f]_i = d_l (gamma^-1)_ij [alpha N]_lj + d_l (gamma^-1 sigma)_ik (A^-1)_kh [L]_lh

    Args:
        model (CoefficientModel): Coefficient fields.
        noise (NoiseSpec): OU driver.
        alpha: Extended real in [0, inf].
        x: Point or stack of points.
        derivatives (Optional[DerivativeBundle]): Precomputed derivative
            tensors; by default analytic ones, falling back on finite differences.
        M (Optional[np.ndarray]): Precomputed OU covariance.

    Returns:
        np.ndarray: f_alpha(x), shape (..., d).
    """
    x = model.points(x)
    matrices = compute_drift_matrices(model, noise, alpha, x, M)
    bundle = derivatives if derivatives is not None else model.derivatives(x)
    friction_part = np.einsum("...ijl,...lj->...i", bundle.d_gamma_inv, matrices.alphaN)
    coupling_part = np.einsum(
        "...ikl,kh,...lh->...i", bundle.d_gamma_inv_sigma, noise.A_inv, matrices.L_alpha
    )
    return friction_part + coupling_part


def scalar_drift(model: ScalarFrictionModel, noise: NoiseSpec, alpha, x) -> np.ndarray:
    """Closed form of the drift for scalar friction and A = I.

    With P = (xi B)(xi B)^T and T_i = sum D xi_ikl B_kj (xi B)_lj,

        f = T / 2 - (alpha / (lambda + alpha)) (T + P grad(lambda) / lambda) / 2,

    where the prefactor is 1 at alpha = inf. At alpha = 0 only the
    Stratonovich correction T / 2 remains.

    Raises:
        ClosedFormError: If the model is not scalar-friction or A is not the identity.
    """
    if not isinstance(model, ScalarFrictionModel):
        raise ClosedFormError(f"{model.name} is not a scalar-friction model")
    if not noise.is_identity_relaxation:
        raise ClosedFormError("the scalar closed form requires A = I")

    alpha = parse_alpha(alpha)
    x = model.points(x)
    lam = model.friction(x)
    xiB = model.xi(x) @ noise.B
    trace = np.einsum("...ikl,kj,...lj->...i", model.xi_jacobian(x), noise.B, xiB)

    if alpha == 0.0:
        return 0.5 * trace
    ratio = np.ones_like(lam) if math.isinf(alpha) else alpha / (lam + alpha)
    turbophoretic = np.einsum("...ij,...kj,...k->...i", xiB, xiB, model.friction_grad(x))
    turbophoretic = turbophoretic / lam[..., None]
    return 0.5 * trace - 0.5 * ratio[..., None] * (trace + turbophoretic)


class DriftProvider:
    """Evaluates the limit-equation coefficients along trajectories.

    The inertial drift is recomputed at every call unless a lattice resolution
    is given, in which case values are cached per lattice cell and evaluated
    at the cell centre.

    Args:
        model (CoefficientModel): Coefficient fields.
        noise (NoiseSpec): OU driver.
        alpha: Extended real in [0, inf].
        method (str): ``auto`` uses the scalar closed form when it applies,
            ``general`` always contracts the matrix-equation solutions,
            ``scalar`` forces the closed form.
        resolution (Optional[float]): Lattice spacing of the drift cache.
    """

    METHODS = ("auto", "general", "scalar")

    def __init__(
        self,
        model: CoefficientModel,
        noise: NoiseSpec,
        alpha,
        method: str = "auto",
        resolution: Optional[float] = None,
    ):
        if method not in self.METHODS:
            raise ConfigError(f"Unknown drift method: {method}", "drift_method")
        if resolution is not None and resolution <= 0.0:
            raise ConfigError("cache resolution must be positive", "cache_resolution")

        self.model = model
        self.noise = noise
        self.alpha = parse_alpha(alpha)
        self.M = compute_M(noise)
        scalar_ok = isinstance(model, ScalarFrictionModel) and noise.is_identity_relaxation
        if method == "auto":
            method = "scalar" if scalar_ok else "general"
        self.method = method
        self.resolution = resolution
        self._cache: Dict[Tuple[int, ...], np.ndarray] = {}
        self._noise_map = noise.A_inv @ noise.B

    def inertial(self, x) -> np.ndarray:
        """f_alpha at x."""
        x = self.model.points(x)
        if self.resolution is None:
            return self._evaluate(x)
        return self._cached(x)

    def _evaluate(self, x):
        if self.method == "scalar":
            return scalar_drift(self.model, self.noise, self.alpha, x)
        return inertial_drift(self.model, self.noise, self.alpha, x, M=self.M)

    def _cached(self, x):
        flat = x.reshape(-1, self.model.dim)
        keys = np.round(flat / self.resolution).astype(np.int64)
        unique, inverse = np.unique(keys, axis=0, return_inverse=True)
        missing = [i for i, key in enumerate(map(tuple, unique)) if key not in self._cache]
        if missing:
            centres = unique[missing] * self.resolution
            values = self._evaluate(centres)
            for i, value in zip(missing, values):
                self._cache[tuple(unique[i])] = value
        table = np.stack([self._cache[tuple(key)] for key in unique])
        return table[inverse.reshape(-1)].reshape(x.shape)

    def drift(self, x) -> np.ndarray:
        """gamma^-1 b + f_alpha at x."""
        x = self.model.points(x)
        gamma_inv = self.model.gamma_inv(x)
        return np.einsum("...ij,...j->...i", gamma_inv, self.model.b(x)) + self.inertial(x)

    def diffusion(self, x) -> np.ndarray:
        """gamma^-1 sigma A^-1 B at x, shape (..., d, m)."""
        _, reduced = self.model.reduced_coefficients(self.model.points(x))
        return reduced @ self._noise_map
