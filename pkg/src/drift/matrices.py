"""Covariance blocks of the frozen fast system.

With the slow variable frozen at x, the fast pair (u, z) solves

    du = (1/alpha) (-gamma(x) u + sigma(x) z) dt,   dz = -A z dt + B dw,

whose invariant Gaussian law has covariance Q = [[N, L], [L^T, M]]. The
blocks are computed from dedicated matrix equations, with exact branches for
alpha = 0 and alpha = inf.
"""

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from ..common.config import ALPHA_TOKENS
from ..common.errors import ConfigError
from ..linalg import solve_lyapunov, solve_sylvester
from ..models.base import CoefficientModel
from ..models.noise import NoiseSpec


def parse_alpha(value: Union[str, float, int]) -> float:
    """Map a mass/correlation-time ratio to an extended real in [0, inf].

    Accepts numbers and the tokens ``inf``, ``infinity`` and the infinity sign.

    Raises:
        ConfigError: On unparsable, negative or NaN values.
    """
    if isinstance(value, str):
        token = value.strip().lower()
        if token in ALPHA_TOKENS:
            return ALPHA_TOKENS[token]
        try:
            value = float(token)
        except ValueError:
            raise ConfigError(f"cannot parse alpha from {value!r}", "alpha") from None
    alpha = float(value)
    if math.isnan(alpha) or alpha < 0.0:
        raise ConfigError(f"alpha must lie in [0, inf], got {alpha}", "alpha")
    return alpha


def format_alpha(alpha: float) -> Union[float, str]:
    """JSON-safe rendering of alpha."""
    return "inf" if math.isinf(alpha) else alpha


@dataclass(frozen=True, eq=False)
class DriftMatrices:
    """Frozen-system covariance blocks at a point (or stack of points).

    Attributes:
        M (np.ndarray): Stationary covariance of the OU driver, n x n.
        L_alpha (np.ndarray): Cross covariance of u and z, (..., d, n).
        N_alpha (np.ndarray): Covariance of u, (..., d, d).
        alphaN (np.ndarray): alpha * N_alpha, kept separately so that
            alpha = 0 and alpha = inf are representable.
        alpha (float): Extended real in [0, inf].
    """

    M: np.ndarray
    L_alpha: np.ndarray
    N_alpha: np.ndarray
    alphaN: np.ndarray
    alpha: float

    def to_dict(self) -> dict:
        return {
            "alpha": format_alpha(self.alpha),
            "M": self.M.tolist(),
            "L_alpha": self.L_alpha.tolist(),
            "N_alpha": self.N_alpha.tolist(),
            "alphaN": self.alphaN.tolist(),
        }


@dataclass(frozen=True)
class MixingRate:
    """Exponential mixing rate min(gamma0 / alpha, spectral gap of A)."""

    omega_alpha: float
    alpha: float

    @classmethod
    def compute(cls, model: CoefficientModel, noise: NoiseSpec, alpha: float) -> "MixingRate":
        alpha = parse_alpha(alpha)
        friction_rate = math.inf if alpha == 0.0 else model.gamma0 / alpha
        return cls(min(friction_rate, noise.spectral_gap), alpha)

    def burn_in(self, mixing_times: float) -> float:
        return mixing_times / self.omega_alpha


def compute_M(noise: NoiseSpec) -> np.ndarray:
    """Solve A M + M A^T = B B^T."""
    return solve_lyapunov(-noise.A, -noise.B @ noise.B.T)


def compute_L_alpha(
    model: CoefficientModel, noise: NoiseSpec, M: np.ndarray, alpha, x
) -> np.ndarray:
    """Solve gamma(x) L + alpha L A^T = sigma(x) M.

    alpha = 0 gives gamma^-1 sigma M and alpha = inf gives 0.
    """
    alpha = parse_alpha(alpha)
    x = model.points(x)
    sigma_M = model.sigma(x) @ M
    if alpha == 0.0:
        return np.linalg.solve(model.gamma(x), sigma_M)
    if math.isinf(alpha):
        return np.zeros_like(sigma_M)
    return solve_sylvester(model.gamma(x), alpha * noise.A.T, sigma_M)


def compute_N_alpha(
    model: CoefficientModel, noise: NoiseSpec, L_alpha: np.ndarray, alpha, x, M: Optional[np.ndarray] = None
):
    """Solve gamma(x) N + N gamma(x)^T = L sigma^T + sigma L^T.

    Returns:
        tuple: ``(N_alpha, alphaN)``. At alpha = inf, N is zero and alphaN
        solves gamma X + X gamma^T = sigma (M A^-T + A^-1 M) sigma^T.
    """
    alpha = parse_alpha(alpha)
    x = model.points(x)
    gamma = model.gamma(x)
    sigma = model.sigma(x)

    if math.isinf(alpha):
        M = compute_M(noise) if M is None else M
        inner = M @ noise.A_inv.T + noise.A_inv @ M
        rhs = sigma @ inner @ np.swapaxes(sigma, -1, -2)
        rhs = 0.5 * (rhs + np.swapaxes(rhs, -1, -2))
        alphaN = solve_lyapunov(-gamma, -rhs)
        return np.zeros_like(alphaN), alphaN

    rhs = L_alpha @ np.swapaxes(sigma, -1, -2)
    rhs = rhs + np.swapaxes(rhs, -1, -2)
    N = solve_lyapunov(-gamma, -rhs)
    return N, alpha * N


def compute_drift_matrices(
    model: CoefficientModel, noise: NoiseSpec, alpha, x, M: Optional[np.ndarray] = None
) -> DriftMatrices:
    alpha = parse_alpha(alpha)
    M = compute_M(noise) if M is None else M
    L = compute_L_alpha(model, noise, M, alpha, x)
    N, alphaN = compute_N_alpha(model, noise, L, alpha, x, M)
    return DriftMatrices(M=M, L_alpha=L, N_alpha=N, alphaN=alphaN, alpha=alpha)


def assemble_Q_alpha(model: CoefficientModel, noise: NoiseSpec, alpha, x) -> np.ndarray:
    """Stationary covariance of the frozen fast system from one block Lyapunov solve.

    Solves Gamma Q + Q Gamma^T = -S S^T with Gamma = [[-gamma/alpha, sigma/alpha],
    [0, -A]] and S = [0; B]. Used to cross-validate the dedicated solvers.

    Raises:
        ConfigError: Unless 0 < alpha < inf.
    """
    alpha = parse_alpha(alpha)
    if alpha == 0.0 or math.isinf(alpha):
        raise ConfigError("the block covariance needs a finite positive alpha", "alpha")

    x = model.points(x)
    gamma = model.gamma(x)
    sigma = model.sigma(x)
    lead = gamma.shape[:-2]
    d, n = model.dim, noise.n

    Gamma = np.zeros((*lead, d + n, d + n))
    Gamma[..., :d, :d] = -gamma / alpha
    Gamma[..., :d, d:] = sigma / alpha
    Gamma[..., d:, d:] = -noise.A
    forcing = np.zeros((*lead, d + n, d + n))
    forcing[..., d:, d:] = noise.B @ noise.B.T
    return solve_lyapunov(Gamma, -forcing)
