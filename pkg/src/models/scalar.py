"""Scalar-friction models, gamma(x) = lambda(x) I and sigma(x) = lambda(x) xi(x)."""

from abc import abstractmethod
from typing import Callable, Optional

import numpy as np

from ..common.errors import FrictionBoundError
from .base import CoefficientModel
from .derivatives import DerivativeBundle


class ScalarFrictionModel(CoefficientModel):
    """Base class for models whose friction is a scalar multiple of the identity.

    Subclasses provide lambda, its gradient, the reduced coupling xi and its
    Jacobian ``xi_jacobian[..., i, k, l] = d xi_ik / d x_l``. The general view
    (gamma, sigma) is derived from these, so both views agree exactly.
    """

    def __init__(self, dim: int, noise_dim: int, lambda0: float, lambda1: float, name: str):
        if lambda0 <= 0.0:
            raise FrictionBoundError(f"{name}: lambda0 must be positive, got {lambda0}")
        super().__init__(dim, noise_dim, lambda0, lambda1, name)

    @abstractmethod
    def friction(self, x) -> np.ndarray:
        """lambda(x), shape (...,)."""

    @abstractmethod
    def friction_grad(self, x) -> np.ndarray:
        """Gradient of lambda, shape (..., d)."""

    @abstractmethod
    def xi(self, x) -> np.ndarray:
        """Reduced coupling sigma / lambda, shape (..., d, n)."""

    @abstractmethod
    def xi_jacobian(self, x) -> np.ndarray:
        """Jacobian of xi, shape (..., d, n, d)."""

    def mean_force(self, x) -> np.ndarray:
        x = self.points(x)
        return np.zeros(x.shape)

    @property
    def lambda0(self) -> float:
        return self.gamma0

    @property
    def lambda1(self) -> float:
        return self.gamma1

    def b(self, x):
        return self.mean_force(x)

    def gamma(self, x):
        lam = self.friction(x)
        return lam[..., None, None] * np.eye(self.dim)

    def sigma(self, x):
        return self.friction(x)[..., None, None] * self.xi(x)

    def gamma_inv(self, x):
        return (1.0 / self.friction(x))[..., None, None] * np.eye(self.dim)

    def reduced_coefficients(self, x):
        return self.gamma_inv(x), self.xi(x)

    def analytic_derivatives(self, x):
        lam = self.friction(x)
        grad = self.friction_grad(x)
        d_inv = -grad / (lam**2)[..., None]
        eye = np.eye(self.dim)
        return DerivativeBundle(
            d_gamma_inv=eye[:, :, None] * d_inv[..., None, None, :],
            d_gamma_inv_sigma=self.xi_jacobian(x),
        )

    def check_friction(self, x):
        lam = self.friction(x)
        low, high = float(np.min(lam)), float(np.max(lam))
        slack = 1e-12 * (1.0 + self.gamma1)
        if low < self.gamma0 - slack or high > self.gamma1 + slack:
            raise FrictionBoundError(
                f"{self.name}: friction range [{low:.6g}, {high:.6g}] "
                f"leaves [{self.gamma0:.6g}, {self.gamma1:.6g}]"
            )


class CallableScalarModel(ScalarFrictionModel):
    """Scalar-friction model assembled from callables."""

    def __init__(
        self,
        friction: Callable,
        friction_grad: Callable,
        xi: Callable,
        xi_jacobian: Callable,
        dim: int,
        noise_dim: int,
        lambda0: float,
        lambda1: float,
        mean_force: Optional[Callable] = None,
        name: str = "scalar-callable",
    ):
        super().__init__(dim, noise_dim, lambda0, lambda1, name)
        self._friction = friction
        self._friction_grad = friction_grad
        self._xi = xi
        self._xi_jacobian = xi_jacobian
        self._mean_force = mean_force

    @classmethod
    def from_sigma(
        cls,
        friction: Callable,
        friction_grad: Callable,
        sigma: Callable,
        sigma_jacobian: Callable,
        **kwargs,
    ) -> "CallableScalarModel":
        """Build the model from sigma(x) instead of xi(x) = sigma(x) / lambda(x).

        ``sigma_jacobian[..., i, k, l] = d sigma_ik / d x_l``.
        """

        def xi(x):
            return sigma(x) / friction(x)[..., None, None]

        def xi_jacobian(x):
            lam = friction(x)[..., None, None, None]
            grad = friction_grad(x)[..., None, None, :]
            return sigma_jacobian(x) / lam - sigma(x)[..., None] * grad / lam**2

        return cls(friction, friction_grad, xi, xi_jacobian, **kwargs)

    def friction(self, x):
        return np.asarray(self._friction(self.points(x)), dtype=float)

    def friction_grad(self, x):
        return np.asarray(self._friction_grad(self.points(x)), dtype=float)

    def xi(self, x):
        return np.asarray(self._xi(self.points(x)), dtype=float)

    def xi_jacobian(self, x):
        return np.asarray(self._xi_jacobian(self.points(x)), dtype=float)

    def mean_force(self, x):
        if self._mean_force is None:
            return super().mean_force(x)
        return np.asarray(self._mean_force(self.points(x)), dtype=float)


class ConstantScalarModel(ScalarFrictionModel):
    """One-dimensional model with constant lambda, sigma and b."""

    def __init__(self, lam: float = 2.0, sigma: float = 1.0, b: float = 0.0):
        super().__init__(1, 1, lam, lam, "scalar")
        self.lam = float(lam)
        self.sigma_value = float(sigma)
        self.b_value = float(b)

    def friction(self, x):
        x = self.points(x)
        return np.full(x.shape[:-1], self.lam)

    def friction_grad(self, x):
        return np.zeros(self.points(x).shape)

    def xi(self, x):
        x = self.points(x)
        return np.full((*x.shape[:-1], 1, 1), self.sigma_value / self.lam)

    def xi_jacobian(self, x):
        x = self.points(x)
        return np.zeros((*x.shape[:-1], 1, 1, 1))

    def mean_force(self, x):
        return np.full(self.points(x).shape, self.b_value)


class SineFrictionModel(ScalarFrictionModel):
    """One-dimensional model lambda(x) = base + amplitude sin(k x).

    Either sigma is constant (then xi = sigma / lambda) or xi is constant
    (then sigma = lambda xi).
    """

    def __init__(
        self,
        base: float = 2.0,
        amplitude: float = 1.0,
        wavenumber: float = 1.0,
        sigma: Optional[float] = 1.0,
        xi: Optional[float] = None,
        name: str = "scalar-sine",
    ):
        if (sigma is None) == (xi is None):
            raise ValueError("exactly one of sigma and xi must be given")
        super().__init__(1, 1, base - abs(amplitude), base + abs(amplitude), name)
        self.base = float(base)
        self.amplitude = float(amplitude)
        self.wavenumber = float(wavenumber)
        self.sigma_value = sigma
        self.xi_value = xi

    def friction(self, x):
        x = self.points(x)[..., 0]
        return self.base + self.amplitude * np.sin(self.wavenumber * x)

    def friction_grad(self, x):
        x = self.points(x)
        return self.amplitude * self.wavenumber * np.cos(self.wavenumber * x)

    def xi(self, x):
        if self.xi_value is not None:
            x = self.points(x)
            return np.full((*x.shape[:-1], 1, 1), float(self.xi_value))
        return (self.sigma_value / self.friction(x))[..., None, None]

    def xi_jacobian(self, x):
        if self.xi_value is not None:
            x = self.points(x)
            return np.zeros((*x.shape[:-1], 1, 1, 1))
        lam = self.friction(x)
        grad = self.friction_grad(x)[..., 0]
        return (-self.sigma_value * grad / lam**2)[..., None, None, None]


class TrigonometricScalarModel(ScalarFrictionModel):
    """Random smooth scalar-friction model used for cross-checks.

    lambda(x) = c + sum_l a_l sin(w_l x_l + p_l), xi_ik(x) = P_ik + Q_ik sin(R_ik . x + S_ik)
    and b_i(x) = c_i sin(x_i). All parameters are drawn from ``rng``.
    """

    def __init__(self, dim: int, noise_dim: int, rng: np.random.Generator):
        a = rng.uniform(-0.8, 0.8, dim)
        self.c = float(np.sum(np.abs(a)) + rng.uniform(0.5, 2.0))
        self.a = a
        self.w = rng.uniform(0.5, 2.0, dim)
        self.p = rng.uniform(0.0, 2 * np.pi, dim)
        self.P = rng.normal(size=(dim, noise_dim))
        self.Q = rng.uniform(-0.5, 0.5, (dim, noise_dim))
        self.R = rng.uniform(-1.5, 1.5, (dim, noise_dim, dim))
        self.S = rng.uniform(0.0, 2 * np.pi, (dim, noise_dim))
        self.force = rng.normal(size=dim)
        bound = float(np.sum(np.abs(a)))
        super().__init__(dim, noise_dim, self.c - bound, self.c + bound, "scalar-trig")

    def friction(self, x):
        x = self.points(x)
        return self.c + np.sum(self.a * np.sin(self.w * x + self.p), axis=-1)

    def friction_grad(self, x):
        x = self.points(x)
        return self.a * self.w * np.cos(self.w * x + self.p)

    def _phase(self, x):
        return np.einsum("ikl,...l->...ik", self.R, x) + self.S

    def xi(self, x):
        return self.P + self.Q * np.sin(self._phase(self.points(x)))

    def xi_jacobian(self, x):
        x = self.points(x)
        return (self.Q * np.cos(self._phase(x)))[..., None] * self.R

    def mean_force(self, x):
        return self.force * np.sin(self.points(x))
