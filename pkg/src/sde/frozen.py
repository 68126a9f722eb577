"""The fast system with the slow variable frozen.

    du = (1/alpha) (-gamma(x) u + sigma(x) z) dt,   dz = -A z dt + B dw.

The pair Y = (u, z) is a linear SDE dY = G Y dt + S dw; it is advanced with
exact Gaussian transitions whose step covariance comes from a single
block-matrix exponential, independently of the Lyapunov solvers.
"""

import math
from dataclasses import dataclass

import numpy as np

from ..common.config import TOLERANCES
from ..common.errors import ConfigError
from ..drift.matrices import parse_alpha
from ..linalg import matrix_exponential
from ..models.base import CoefficientModel
from ..models.noise import NoiseSpec
from .brownian import BLOCK_STEPS, stream_generator
from .ou import psd_sqrt


@dataclass(frozen=True, eq=False)
class FrozenTrajectory:
    """Sampled frozen-fast paths.

    Attributes:
        times (np.ndarray): Sample times, shape (S,).
        u (np.ndarray): Shape (R, S, d) for R replicas.
        z (np.ndarray): Shape (R, S, n).
    """

    times: np.ndarray
    u: np.ndarray
    z: np.ndarray


def frozen_generator(model: CoefficientModel, noise: NoiseSpec, alpha: float, x) -> np.ndarray:
    x = model.points(x)
    d, n = model.dim, noise.n
    G = np.zeros((d + n, d + n))
    G[:d, :d] = -model.gamma(x) / alpha
    G[:d, d:] = model.sigma(x) / alpha
    G[d:, d:] = -noise.A
    return G


def exact_transition(G: np.ndarray, forcing: np.ndarray, dt: float):
    """Transition matrix and step covariance of dY = G Y dt + S dw, S S^T = forcing.

    Uses exp([[-G, F], [0, G^T]] dt) = [[., P], [0, Phi^T]], giving the
    covariance Phi P.
    """
    k = G.shape[0]
    block = np.zeros((2 * k, 2 * k))
    block[:k, :k] = -G
    block[:k, k:] = forcing
    block[k:, k:] = G.T
    expo = matrix_exponential(block, dt)
    phi = expo[k:, k:].T
    covariance = phi @ expo[:k, k:]
    return phi, 0.5 * (covariance + covariance.T)


def simulate_frozen_fast(
    x_frozen,
    model: CoefficientModel,
    noise: NoiseSpec,
    alpha,
    T: float,
    dt: float,
    seed: int,
    replicas: int = 1,
    record_every: int = 1,
    first_index: int = 0,
) -> FrozenTrajectory:
    """Simulate independent replicas of the frozen fast system from u = z = 0.

    Replica r uses the stream of trajectory index ``first_index + r``.

    Raises:
        ConfigError: Unless 0 < alpha < inf, dt > 0 and T >= dt.
    """
    alpha = parse_alpha(alpha)
    if alpha == 0.0 or math.isinf(alpha):
        raise ConfigError("the frozen fast system needs a finite positive alpha", "alpha")
    if dt <= 0.0 or T < dt:
        raise ConfigError(f"need dt > 0 and T >= dt, got T={T}, dt={dt}", "dt")

    d, n, m = model.dim, noise.n, noise.m
    G = frozen_generator(model, noise, alpha, x_frozen)
    S = np.zeros((d + n, m))
    S[d:] = noise.B
    phi, covariance = exact_transition(G, S @ S.T, dt)
    factor = psd_sqrt(covariance, TOLERANCES["psd_floor"], "frozen step covariance")

    steps = int(round(T / dt))
    generators = [stream_generator(seed, first_index + r, "frozen") for r in range(replicas)]
    Y = np.zeros((replicas, d + n))
    samples = [Y.copy()]
    for k in range(1, steps + 1):
        if (k - 1) % BLOCK_STEPS == 0:
            block = np.stack([g.standard_normal((BLOCK_STEPS, d + n)) for g in generators], axis=1)
        gauss = block[(k - 1) % BLOCK_STEPS]
        Y = Y @ phi.T + gauss @ factor.T
        if k % record_every == 0:
            samples.append(Y.copy())

    path = np.stack(samples, axis=1)
    times = dt * record_every * np.arange(path.shape[1])
    return FrozenTrajectory(times=times, u=path[..., :d], z=path[..., d:])
