from abc import ABC, abstractmethod
from typing import Callable, Optional

import numpy as np

from ..common.config import TOLERANCES
from ..common.errors import FrictionBoundError, MatrixShapeError, NonFiniteError
from .derivatives import DerivativeBundle, fd_derivatives


class CoefficientModel(ABC):
    """Base class for the coefficient fields of the inertial system.

    A model supplies the mean force b(x), the friction gamma(x) and the noise
    coupling sigma(x) of

        dx = v dt,   mu dv = (b(x) - gamma(x) v + sigma(x) z) dt.

    Every evaluator accepts a point of shape (d,) or a stack of points of shape
    (..., d) and returns arrays with the same leading axes.
    """

    def __init__(
        self, dim: int, noise_dim: int, gamma0: float, gamma1: float, name: str = "model"
    ):
        """Initialize a coefficient model.

        Args:
            dim (int): Spatial dimension d.
            noise_dim (int): Dimension n of the OU driver.
            gamma0 (float): Lower bound of the symmetrized friction.
            gamma1 (float): Upper bound of the symmetrized friction.
            name (str): Label used in logs and reports.
        """
        if dim < 1 or noise_dim < 1:
            raise MatrixShapeError(f"dimensions must be positive, got d={dim}, n={noise_dim}")
        if not 0.0 < gamma0 <= gamma1:
            raise FrictionBoundError(
                f"friction bounds must satisfy 0 < gamma0 <= gamma1, got {gamma0}, {gamma1}"
            )
        self.dim = dim
        self.noise_dim = noise_dim
        self.gamma0 = float(gamma0)
        self.gamma1 = float(gamma1)
        self.name = name

    @abstractmethod
    def b(self, x) -> np.ndarray:
        """Mean force, shape (..., d)."""

    @abstractmethod
    def gamma(self, x) -> np.ndarray:
        """Friction matrix, shape (..., d, d)."""

    @abstractmethod
    def sigma(self, x) -> np.ndarray:
        """Noise coupling, shape (..., d, n)."""

    def analytic_derivatives(self, x) -> Optional[DerivativeBundle]:
        """Closed-form derivative tensors, or None to fall back on finite differences."""
        return None

    def points(self, x) -> np.ndarray:
        """Coerce ``x`` to a float array whose last axis is the spatial one."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 0 and self.dim == 1:
            x = x.reshape(1)
        if x.ndim == 0 or x.shape[-1] != self.dim:
            raise MatrixShapeError(f"{self.name} expects points of dimension {self.dim}")
        if not np.all(np.isfinite(x)):
            raise NonFiniteError(f"{self.name} evaluated at a non-finite point")
        return x

    def gamma_inv(self, x) -> np.ndarray:
        return np.linalg.inv(self.gamma(x))

    def reduced_coefficients(self, x):
        """Return ``(gamma^-1, gamma^-1 sigma)`` at x."""
        gamma_inv = self.gamma_inv(x)
        return gamma_inv, gamma_inv @ self.sigma(x)

    def derivatives(self, x, step: Optional[float] = None) -> DerivativeBundle:
        """Derivative bundle at x, analytic when available."""
        bundle = self.analytic_derivatives(x)
        if bundle is None:
            bundle = fd_derivatives(self, x, step)
        return bundle

    def check_friction(self, x):
        """Verify gamma0 I <= sym(gamma(x)) <= gamma1 I at every point of x.

        Raises:
            FrictionBoundError: If some eigenvalue leaves the declared band.
        """
        g = self.gamma(x)
        sym = 0.5 * (g + np.swapaxes(g, -1, -2))
        eig = np.linalg.eigvalsh(sym)
        slack = TOLERANCES["friction_slack"] * (1.0 + self.gamma1)
        low, high = float(eig.min()), float(eig.max())
        if low < self.gamma0 - slack or high > self.gamma1 + slack:
            raise FrictionBoundError(
                f"{self.name}: symmetrized friction spectrum [{low:.6g}, {high:.6g}] "
                f"leaves [{self.gamma0:.6g}, {self.gamma1:.6g}]"
            )


class FunctionalModel(CoefficientModel):
    """Coefficient model assembled from plain callables.

    Constant fields can be passed as arrays; they are broadcast over the point
    axes and get zero analytic derivatives.
    """

    def __init__(
        self,
        b,
        gamma,
        sigma,
        dim: int,
        noise_dim: int,
        gamma0: float,
        gamma1: float,
        derivatives: Optional[Callable[[np.ndarray], DerivativeBundle]] = None,
        name: str = "functional",
    ):
        super().__init__(dim, noise_dim, gamma0, gamma1, name)
        self._b = b
        self._gamma = gamma
        self._sigma = sigma
        self._derivatives = derivatives
        self._constant = not any(callable(f) for f in (b, gamma, sigma))

    def _field(self, field, x, shape):
        x = self.points(x)
        if callable(field):
            return np.asarray(field(x), dtype=float)
        return np.broadcast_to(np.asarray(field, dtype=float).reshape(shape), (*x.shape[:-1], *shape))

    def b(self, x):
        return self._field(self._b, x, (self.dim,))

    def gamma(self, x):
        return self._field(self._gamma, x, (self.dim, self.dim))

    def sigma(self, x):
        return self._field(self._sigma, x, (self.dim, self.noise_dim))

    def analytic_derivatives(self, x):
        if self._derivatives is not None:
            return self._derivatives(self.points(x))
        if self._constant:
            lead = self.points(x).shape[:-1]
            d, n = self.dim, self.noise_dim
            return DerivativeBundle(
                d_gamma_inv=np.zeros((*lead, d, d, d)),
                d_gamma_inv_sigma=np.zeros((*lead, d, n, d)),
            )
        return None
