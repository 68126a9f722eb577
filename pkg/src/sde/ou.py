"""Exact transitions of the OU driver eps dz = -A z dt + B dw."""

import logging
from functools import lru_cache
from typing import Optional

import numpy as np

from ..common.config import TOLERANCES
from ..common.errors import ToleranceError
from ..drift.matrices import compute_M
from ..linalg import matrix_exponential
from ..models.noise import NoiseSpec

logger = logging.getLogger(__name__)


def psd_sqrt(S: np.ndarray, floor: float, name: str = "covariance") -> np.ndarray:
    """Symmetric square root of a PSD matrix, clipping round-off negatives.

    Raises:
        ToleranceError: If an eigenvalue is below ``floor`` times the matrix scale.
    """
    S = 0.5 * (S + S.T)
    eig, vec = np.linalg.eigh(S)
    scale = 1.0 + float(np.max(np.abs(S)))
    if eig.size and eig.min() < floor * scale:
        raise ToleranceError(f"{name} is not positive semidefinite (min eigenvalue {eig.min():.3g})")
    return (vec * np.sqrt(np.clip(eig, 0.0, None))) @ vec.T


class OUTransition:
    """One-step law of the OU driver over dt.

    z' = E z + eta with E = exp(-A dt / eps) and eta ~ N(0, S), where
    S = (M - E M E^T) / eps. The innovation is correlated with the Brownian
    increment dW over the same step: Cov(eta, dW) = A^-1 (I - E) B.

    Args:
        noise (NoiseSpec): OU driver.
        epsilon (float): Correlation time.
        dt (float): Step.
        M (Optional[np.ndarray]): Precomputed stationary covariance.
    """

    def __init__(self, noise: NoiseSpec, epsilon: float, dt: float, M: Optional[np.ndarray] = None):
        self.noise = noise
        self.epsilon = float(epsilon)
        self.dt = float(dt)
        M = compute_M(noise) if M is None else M
        self.M = M

        E = matrix_exponential(-noise.A, dt / epsilon)
        self.decay = E
        self.covariance = (M - E @ M @ E.T) / epsilon
        self.factor = psd_sqrt(self.covariance, TOLERANCES["psd_floor"], "OU step covariance")

        cross = noise.A_inv @ (np.eye(noise.n) - E) @ noise.B
        self.gain = cross / dt
        conditional = self.covariance - cross @ cross.T / dt
        # exact cancellation leaves relative round-off when dt << eps
        self.conditional_factor = psd_sqrt(conditional, -1e-9, "OU conditional covariance")

    def step(self, z: np.ndarray, gauss: np.ndarray) -> np.ndarray:
        """z' = E z + S^(1/2) g for standard normal g of size n."""
        return z @ self.decay.T + gauss @ self.factor.T

    def coupled_step(self, z: np.ndarray, dW: np.ndarray, gauss: np.ndarray) -> np.ndarray:
        """Sample z' jointly with a given Brownian increment dW over the step."""
        return z @ self.decay.T + dW @ self.gain.T + gauss @ self.conditional_factor.T


@lru_cache(maxsize=32)
def _transition(noise: NoiseSpec, epsilon: float, dt: float) -> OUTransition:
    return OUTransition(noise, epsilon, dt)


def ou_step(z, noise: NoiseSpec, epsilon: float, dt: float, gauss) -> np.ndarray:
    """Exact-in-law OU update; the factorization is cached per (noise, eps, dt)."""
    return _transition(noise, float(epsilon), float(dt)).step(np.asarray(z, float), np.asarray(gauss, float))
