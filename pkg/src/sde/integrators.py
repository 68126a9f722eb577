"""One-step integrators for the inertial system and its limit equation.

All steppers act on stacks of paths: positions have shape (P, d), OU states
(P, n) and Brownian increments (P, m).
"""

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from ..drift.inertial import DriftProvider
from ..drift.turbulence import turbulence_drift
from ..linalg import matrix_exponential
from ..models.base import CoefficientModel
from ..models.noise import NoiseSpec
from ..models.scalar import ScalarFrictionModel
from ..models.turbulence import TurbulenceModel
from .ou import OUTransition


@dataclass(frozen=True, eq=False)
class InertialState:
    x: np.ndarray
    v: np.ndarray
    z: np.ndarray

    def is_finite(self) -> np.ndarray:
        """Per-path finiteness mask."""
        return (
            np.all(np.isfinite(self.x), axis=-1)
            & np.all(np.isfinite(self.v), axis=-1)
            & np.all(np.isfinite(self.z), axis=-1)
        )


def relax_velocity(model: CoefficientModel, x, v, force, mu: float, dt: float) -> np.ndarray:
    """v' = E v + (I - E) gamma^-1 force with E = exp(-gamma(x) dt / mu)."""
    if isinstance(model, ScalarFrictionModel):
        lam = model.friction(x)[..., None]
        decay = np.exp(-lam * dt / mu)
        return decay * v + (1.0 - decay) * force / lam
    gamma = model.gamma(x)
    decay = matrix_exponential(-gamma, dt / mu)
    target = np.linalg.solve(gamma, force[..., None])[..., 0]
    return target + np.einsum("...ij,...j->...i", decay, v - target)


def inertial_step(
    state: InertialState,
    model: CoefficientModel,
    noise: NoiseSpec,
    mu: float,
    epsilon: float,
    dt: float,
    gauss: np.ndarray,
    dW: Optional[np.ndarray] = None,
    transition: Optional[OUTransition] = None,
) -> InertialState:
    """Advance (x, v, z) by dt with coefficients frozen at the start of the step.

    The velocity relaxes exponentially toward gamma^-1 (b + sigma z), which
    stays stable for any mu; x follows the trapezoid of v. When ``dW`` is
    given, z is sampled jointly with it and ``gauss`` feeds the conditional
    innovation; otherwise ``gauss`` drives the plain OU step.
    """
    transition = transition or OUTransition(noise, epsilon, dt)
    x, v, z = state.x, state.v, state.z
    force = model.b(x) + np.einsum("...ik,...k->...i", model.sigma(x), z)
    v_next = relax_velocity(model, x, v, force, mu, dt)
    x_next = x + 0.5 * dt * (v + v_next)
    if dW is None:
        z_next = transition.step(z, gauss)
    else:
        z_next = transition.coupled_step(z, dW, gauss)
    return InertialState(x_next, v_next, z_next)


def limit_step(x, provider: DriftProvider, dt: float, dW) -> np.ndarray:
    """Ito Euler-Maruyama step of dx = [gamma^-1 b + f_alpha] dt + gamma^-1 sigma A^-1 B dW."""
    x = np.asarray(x, dtype=float)
    diffusion = provider.diffusion(x)
    return x + provider.drift(x) * dt + np.einsum("...ij,...j->...i", diffusion, dW)


def _transport(turbulence: TurbulenceModel, x, dW):
    return np.einsum("...ik,...k->...i", turbulence.fields(x), dW)


def transport_split_step(
    x, turbulence: TurbulenceModel, alpha, dt: float, dW, substeps: int = 1
) -> np.ndarray:
    """Stratonovich splitting step for a turbulence model.

    First flows along sum_k xi_k dW_k for unit time with classical RK4, which
    keeps the particle on the level sets the fields are tangent to, then takes
    an explicit step with the mean flow and -b_alpha.
    """
    y = np.asarray(x, dtype=float)
    h = 1.0 / substeps
    for _ in range(substeps):
        k1 = _transport(turbulence, y, dW)
        k2 = _transport(turbulence, y + 0.5 * h * k1, dW)
        k3 = _transport(turbulence, y + 0.5 * h * k2, dW)
        k4 = _transport(turbulence, y + h * k3, dW)
        y = y + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
    return y + dt * (turbulence.mean_flow(y) + turbulence_drift(turbulence, alpha, y))


def freeze_flagged(previous: InertialState, current: InertialState, bad: np.ndarray) -> InertialState:
    """Keep the last finite state on flagged paths."""
    if not np.any(bad):
        return current
    mask = bad[:, None]
    return replace(
        current,
        x=np.where(mask, previous.x, current.x),
        v=np.where(mask, previous.v, current.v),
        z=np.where(mask, previous.z, current.z),
    )
