"""Synthetic turbulence models for inertial particles.

A particle feels Stokes drag toward the fluid velocity ``u(x) + sum_k xi_k(x) z_k``
with a friction ``c0 k_T(x)`` set by the turbulent kinetic energy:

    mu dv = c0 k_T(x) (u(x) - v + sum_k xi_k(x) z_k) dt.

Field Jacobians use the layout ``jac[..., i, k, l] = d (xi_k)_i / d x_l``, so the
stacked fields Xi (columns xi_k) and their Jacobian line up with the
scalar-friction view where xi = Xi.
"""

import logging
from abc import ABC, abstractmethod
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit

from ..common.config import MODEL_DEFAULTS, TOLERANCES
from ..common.errors import MatrixShapeError, ModelBoundError, NonFiniteError
from .base import FunctionalModel
from .noise import NoiseSpec
from .scalar import ScalarFrictionModel

logger = logging.getLogger(__name__)

_ROTATION = np.array([[0.0, -1.0], [1.0, 0.0]])


def perp(x: np.ndarray) -> np.ndarray:
    """Rotate planar vectors by a quarter turn, x -> (-x2, x1)."""
    return np.stack([-x[..., 1], x[..., 0]], axis=-1)


class TurbulenceModel(ABC):
    """Base class for turbulence models in the plane.

    Subclasses define the turbulent kinetic energy k_T, its gradient, the
    divergence-free field family and the field Jacobians.
    """

    dim = 2

    def __init__(self, c0: float, kT_floor: float, kT_ceiling: float, n_fields: int, name: str):
        if c0 <= 0.0:
            raise ModelBoundError(f"{name}: c0 must be positive, got {c0}")
        if not 0.0 < kT_floor <= kT_ceiling:
            raise ModelBoundError(
                f"{name}: k_T bounds must satisfy 0 < floor <= ceiling, got {kT_floor}, {kT_ceiling}"
            )
        self.c0 = float(c0)
        self.kT_floor = float(kT_floor)
        self.kT_ceiling = float(kT_ceiling)
        self.n_fields = n_fields
        self.name = name

    @abstractmethod
    def turbulent_energy(self, x) -> np.ndarray:
        """k_T(x), shape (...,)."""

    @abstractmethod
    def turbulent_energy_grad(self, x) -> np.ndarray:
        """Gradient of k_T, shape (..., 2)."""

    @abstractmethod
    def fields(self, x) -> np.ndarray:
        """Stacked fields Xi with columns xi_k, shape (..., 2, K)."""

    @abstractmethod
    def field_jacobians(self, x) -> np.ndarray:
        """Jacobians of the fields, shape (..., 2, K, 2)."""

    def mean_flow(self, x) -> np.ndarray:
        return np.zeros(self.points(x).shape)

    def points(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 0 or x.shape[-1] != self.dim:
            raise MatrixShapeError(f"{self.name} expects planar points, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise NonFiniteError(f"{self.name} evaluated at a non-finite point")
        return x

    def friction(self, x) -> np.ndarray:
        return self.c0 * self.turbulent_energy(x)

    def log_energy_grad(self, x) -> np.ndarray:
        return self.turbulent_energy_grad(x) / self.turbulent_energy(x)[..., None]

    def correlation(self, x) -> np.ndarray:
        """C(x) = sum_k xi_k xi_k^T."""
        xi = self.fields(x)
        return xi @ np.swapaxes(xi, -1, -2)

    def centrifugal(self, x) -> np.ndarray:
        """sum_k D xi_k(x) xi_k(x)."""
        return np.einsum("...ikl,...lk->...i", self.field_jacobians(x), self.fields(x))

    def divergence(self, x) -> np.ndarray:
        """div xi_k for every field, shape (..., K)."""
        return np.einsum("...iki->...k", self.field_jacobians(x))

    def noise_spec(self) -> NoiseSpec:
        return NoiseSpec.identity(self.n_fields)

    def check(self, x):
        """Verify the energy floor and incompressibility at the points x.

        Raises:
            ModelBoundError: If k_T drops below its floor or some field has
                divergence above tolerance.
        """
        energy = self.turbulent_energy(x)
        if float(np.min(energy)) < self.kT_floor * (1.0 - TOLERANCES["friction_slack"]):
            raise ModelBoundError(
                f"{self.name}: k_T = {float(np.min(energy)):.6g} below floor {self.kT_floor:.6g}"
            )
        worst = float(np.max(np.abs(self.divergence(x))))
        if worst > TOLERANCES["divergence"]:
            raise ModelBoundError(f"{self.name}: field divergence {worst:.3g} is not zero")


class RadialProfile:
    """Radial profile f of a single vortex xi(x) = 2 f'(|x|^2) x_perp.

    Only f' and f'' enter the fields. Catalog:

    - ``linear``: f(s) = s, switched off by a quintic smoothstep on
      R^2 <= s <= 2 R^2 so the field stays bounded.
    - ``gaussian``: f'(s) = exp(-s / l^2).
    """

    KINDS = ("linear", "gaussian")

    def __init__(self, kind: str = "linear", cutoff_radius: Optional[float] = None, length: float = 1.0):
        if kind not in self.KINDS:
            raise ValueError(f"Unknown radial profile: {kind}")
        self.kind = kind
        self.cutoff_radius = float(
            MODEL_DEFAULTS["cutoff_radius"] if cutoff_radius is None else cutoff_radius
        )
        self.length = float(length)

    def first(self, s: np.ndarray) -> np.ndarray:
        if self.kind == "gaussian":
            return np.exp(-s / self.length**2)
        t = np.clip((s - self.cutoff_radius**2) / self.cutoff_radius**2, 0.0, 1.0)
        return 1.0 - t**3 * (10.0 - 15.0 * t + 6.0 * t**2)

    def second(self, s: np.ndarray) -> np.ndarray:
        if self.kind == "gaussian":
            return -np.exp(-s / self.length**2) / self.length**2
        t = np.clip((s - self.cutoff_radius**2) / self.cutoff_radius**2, 0.0, 1.0)
        return -30.0 * t**2 * (1.0 - t) ** 2 / self.cutoff_radius**2

    def to_dict(self) -> dict:
        return {"kind": self.kind, "cutoff_radius": self.cutoff_radius, "length": self.length}


class VortexModel(TurbulenceModel):
    """Single vortex with constant turbulent energy."""

    def __init__(self, profile: Optional[RadialProfile] = None, c0: float = 1.0, energy: float = 1.0):
        super().__init__(c0, energy, energy, 1, "vortex")
        self.profile = profile or RadialProfile()
        self.energy = float(energy)

    def turbulent_energy(self, x):
        return np.full(self.points(x).shape[:-1], self.energy)

    def turbulent_energy_grad(self, x):
        return np.zeros(self.points(x).shape)

    def fields(self, x):
        x = self.points(x)
        s = np.sum(x**2, axis=-1)
        return (2.0 * self.profile.first(s)[..., None] * perp(x))[..., None]

    def field_jacobians(self, x):
        # D xi = 4 f'' x_perp x^T + 2 f' J
        x = self.points(x)
        s = np.sum(x**2, axis=-1)
        outer = perp(x)[..., :, None] * x[..., None, :]
        jac = (
            4.0 * self.profile.second(s)[..., None, None] * outer
            + 2.0 * self.profile.first(s)[..., None, None] * _ROTATION
        )
        return jac[..., :, None, :]


class CellularModel(TurbulenceModel):
    """Periodic array of vortices with stream function psi = sin(k1 x1) cos(k2 x2).

    The single field is xi = grad_perp psi and the friction is the constant lam.
    """

    def __init__(self, k1: float = 1.0, k2: float = 1.0, lam: float = 1.0, c0: float = 1.0):
        if k1 == 0.0 or k2 == 0.0:
            raise ModelBoundError(f"cellular wavenumbers must be nonzero, got ({k1}, {k2})")
        energy = lam / c0
        super().__init__(c0, energy, energy, 1, "cellular")
        self.k1 = float(k1)
        self.k2 = float(k2)
        self.lam = float(lam)

    def _trig(self, x):
        x = self.points(x)
        a, b = self.k1 * x[..., 0], self.k2 * x[..., 1]
        return np.sin(a), np.cos(a), np.sin(b), np.cos(b)

    def psi(self, x) -> np.ndarray:
        s1, _, _, c2 = self._trig(x)
        return s1 * c2

    def grad_psi(self, x) -> np.ndarray:
        s1, c1, s2, c2 = self._trig(x)
        return np.stack([self.k1 * c1 * c2, -self.k2 * s1 * s2], axis=-1)

    def turbulent_energy(self, x):
        return np.full(self.points(x).shape[:-1], self.lam / self.c0)

    def turbulent_energy_grad(self, x):
        return np.zeros(self.points(x).shape)

    def fields(self, x):
        s1, c1, s2, c2 = self._trig(x)
        xi = np.stack([self.k2 * s1 * s2, self.k1 * c1 * c2], axis=-1)
        return xi[..., None]

    def field_jacobians(self, x):
        s1, c1, s2, c2 = self._trig(x)
        k1, k2 = self.k1, self.k2
        row1 = np.stack([k1 * k2 * c1 * s2, k2 * k2 * s1 * c2], axis=-1)
        row2 = np.stack([-k1 * k1 * s1 * c2, -k1 * k2 * c1 * s2], axis=-1)
        return np.stack([row1, row2], axis=-2)[..., :, None, :]

    def centrifugal_closed_form(self, x) -> np.ndarray:
        """D xi xi = k1 k2 (k2 sin(k1 x1) cos(k1 x1), -k1 sin(k2 x2) cos(k2 x2))."""
        s1, c1, s2, c2 = self._trig(x)
        k1, k2 = self.k1, self.k2
        return k1 * k2 * np.stack([k2 * s1 * c1, -k1 * s2 * c2], axis=-1)

    def decay_bracket(self, x) -> np.ndarray:
        """cos^2(k1 x1) + sin^2(k2 x2), the nonnegative factor in grad psi . D xi xi."""
        _, c1, s2, _ = self._trig(x)
        return c1**2 + s2**2


class PipeModel(TurbulenceModel):
    """Turbulent channel across x2 in [-1, 1], continued to the whole plane.

    k_T(x2) = floor + w softplus((peak - curvature x2^2 - floor) / w) follows the
    parabola away from the floor and never drops below it. The fields are the
    constant frame noise_scale * (e1, e2), so C(x) = noise_scale^2 I.
    """

    # softplus(u) == u to double precision beyond this point
    _LINEAR_REGIME = 35.0

    def __init__(
        self,
        peak: Optional[float] = None,
        curvature: Optional[float] = None,
        floor: Optional[float] = None,
        smoothing: Optional[float] = None,
        c0: float = 1.0,
        mean_speed: float = 0.0,
        noise_scale: float = 1.0,
    ):
        self.peak = float(MODEL_DEFAULTS["pipe_peak"] if peak is None else peak)
        self.curvature = float(MODEL_DEFAULTS["pipe_curvature"] if curvature is None else curvature)
        self.floor = float(MODEL_DEFAULTS["pipe_floor"] if floor is None else floor)
        self.smoothing = float(MODEL_DEFAULTS["pipe_smoothing"] if smoothing is None else smoothing)
        if self.smoothing <= 0.0 or self.curvature < 0.0:
            raise ModelBoundError("pipe smoothing must be positive and curvature nonnegative")
        if self.peak <= self.floor:
            raise ModelBoundError(
                f"pipe peak {self.peak} must exceed the energy floor {self.floor}"
            )
        ceiling = self.floor + self.smoothing * np.logaddexp(
            0.0, (self.peak - self.floor) / self.smoothing
        )
        super().__init__(c0, self.floor, float(ceiling), 2, "pipe")
        self.mean_speed = float(mean_speed)
        self.noise_scale = float(noise_scale)

    def _excess(self, x):
        x2 = self.points(x)[..., 1]
        return x2, self.peak - self.curvature * x2**2 - self.floor

    def turbulent_energy(self, x):
        _, excess = self._excess(x)
        u = excess / self.smoothing
        smooth = self.smoothing * np.logaddexp(0.0, u)
        return self.floor + np.where(u > self._LINEAR_REGIME, excess, smooth)

    def turbulent_energy_grad(self, x):
        x2, excess = self._excess(x)
        slope = expit(excess / self.smoothing) * (-2.0 * self.curvature * x2)
        return np.stack([np.zeros_like(slope), slope], axis=-1)

    def mean_flow(self, x):
        x2 = self.points(x)[..., 1]
        profile = np.where(np.abs(x2) <= 1.0, (1.0 - x2**2) ** 2, 0.0)
        return np.stack([self.mean_speed * profile, np.zeros_like(x2)], axis=-1)

    def fields(self, x):
        lead = self.points(x).shape[:-1]
        return np.broadcast_to(self.noise_scale * np.eye(2), (*lead, 2, 2)).copy()

    def field_jacobians(self, x):
        lead = self.points(x).shape[:-1]
        return np.zeros((*lead, 2, 2, 2))


class TranslationalModel(TurbulenceModel):
    """Plane-wave fields with constant correlation and constant energy.

    Each wavevector q contributes the pair q_perp/|q| cos(q.x) and
    q_perp/|q| sin(q.x); both are divergence free, transported along their
    own direction, and C(x) = sum_q q_perp q_perp^T / |q|^2 is constant.
    """

    def __init__(self, wavevectors: Sequence[Sequence[float]] = ((1.0, 0.0), (0.0, 1.0)), lam: float = 1.0, c0: float = 1.0):
        q = np.asarray(wavevectors, dtype=float).reshape(-1, 2)
        norms = np.linalg.norm(q, axis=-1)
        if np.any(norms == 0.0):
            raise ModelBoundError("translational wavevectors must be nonzero")
        energy = lam / c0
        super().__init__(c0, energy, energy, 2 * len(q), "translational")
        self.wavevectors = q
        self.directions = perp(q) / norms[:, None]
        self.lam = float(lam)

    def turbulent_energy(self, x):
        return np.full(self.points(x).shape[:-1], self.lam / self.c0)

    def turbulent_energy_grad(self, x):
        return np.zeros(self.points(x).shape)

    def _phase(self, x):
        return self.points(x) @ self.wavevectors.T

    def fields(self, x):
        phase = self._phase(x)
        weights = np.concatenate([np.cos(phase), np.sin(phase)], axis=-1)
        directions = np.concatenate([self.directions, self.directions], axis=0)
        return directions.T * weights[..., None, :]

    def field_jacobians(self, x):
        phase = self._phase(x)
        dweights = np.concatenate([-np.sin(phase), np.cos(phase)], axis=-1)
        directions = np.concatenate([self.directions, self.directions], axis=0)
        q = np.concatenate([self.wavevectors, self.wavevectors], axis=0)
        # jac[i, k, l] = dir_k[i] * q_k[l] * dweight_k
        return directions.T[:, :, None] * q[None, :, :] * dweights[..., None, :, None]


class TurbulenceCoefficientModel(ScalarFrictionModel):
    """Scalar-friction view of a turbulence model.

    b = c0 k_T u, gamma = c0 k_T I and sigma = c0 k_T Xi, so xi = Xi.
    """

    def __init__(self, turbulence: TurbulenceModel):
        self.turbulence = turbulence
        super().__init__(
            turbulence.dim,
            turbulence.n_fields,
            turbulence.c0 * turbulence.kT_floor,
            turbulence.c0 * turbulence.kT_ceiling,
            turbulence.name,
        )

    def friction(self, x):
        return self.turbulence.friction(x)

    def friction_grad(self, x):
        return self.turbulence.c0 * self.turbulence.turbulent_energy_grad(x)

    def xi(self, x):
        return self.turbulence.fields(x)

    def xi_jacobian(self, x):
        return self.turbulence.field_jacobians(x)

    def mean_force(self, x):
        return self.friction(x)[..., None] * self.turbulence.mean_flow(x)


def lattice_points(n_per_axis: int = 21, extent: float = 3.0) -> np.ndarray:
    axis = np.linspace(-extent, extent, n_per_axis)
    grid = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1)
    return grid.reshape(-1, 2)


def as_coefficient_model(turbulence: TurbulenceModel, view: str = "scalar"):
    """Coefficient model induced by a turbulence model.

    Args:
        turbulence (TurbulenceModel): Source model.
        view (str): ``scalar`` for the scalar-friction view with analytic
            derivatives, ``general`` for a plain functional model that falls
            back on finite differences.

    Returns:
        CoefficientModel: Model with gamma0 = c0 k_T floor.

    Raises:
        ModelBoundError: If k_T drops below its floor at the lattice points.
    """
    turbulence.check(lattice_points())
    scalar = TurbulenceCoefficientModel(turbulence)
    if view == "scalar":
        return scalar
    if view != "general":
        raise ValueError(f"Unknown model view: {view}")
    return FunctionalModel(
        b=scalar.b,
        gamma=scalar.gamma,
        sigma=scalar.sigma,
        dim=scalar.dim,
        noise_dim=scalar.noise_dim,
        gamma0=scalar.gamma0,
        gamma1=scalar.gamma1,
        name=f"{turbulence.name}-general",
    )
