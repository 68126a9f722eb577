"""Spatial derivative tensors of the coefficient fields.

Tensors keep the differentiation index last:

    d_gamma_inv[..., i, j, l]        = d/dx_l (gamma^-1)_ij
    d_gamma_inv_sigma[..., i, k, l]  = d/dx_l (gamma^-1 sigma)_ik
"""

from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional

import numpy as np

from ..common.config import MODEL_DEFAULTS, TOLERANCES
from ..common.errors import ToleranceError

if TYPE_CHECKING:
    from .base import CoefficientModel


@dataclass(frozen=True, eq=False)
class DerivativeBundle:
    d_gamma_inv: np.ndarray
    d_gamma_inv_sigma: np.ndarray


def _central(model: "CoefficientModel", x: np.ndarray, h: np.ndarray):
    d = model.dim
    dg, dgs = [], []
    for l in range(d):
        shift = np.zeros(d)
        shift[l] = 1.0
        offset = h[..., None] * shift
        g_plus, gs_plus = model.reduced_coefficients(x + offset)
        g_minus, gs_minus = model.reduced_coefficients(x - offset)
        scale = 2.0 * h[..., None, None]
        dg.append((g_plus - g_minus) / scale)
        dgs.append((gs_plus - gs_minus) / scale)
    return np.stack(dg, axis=-1), np.stack(dgs, axis=-1)


def fd_derivatives(
    model: "CoefficientModel", x, step: Optional[float] = None
) -> DerivativeBundle:
    """Central-difference derivative bundle with a Richardson consistency check.

    The step at each point is ``step * (1 + |x|)``. Differences with step h and
    h/2 must agree within ``10 h^2`` relative to the size of the fields; the
    Richardson-extrapolated estimate is returned.

    Args:
        model (CoefficientModel): Model evaluable in a neighbourhood of x.
        x: Point or stack of points, shape (..., d).
        step (Optional[float]): Base step. Defaults to MODEL_DEFAULTS["fd_step"].

    Returns:
        DerivativeBundle: Derivatives of gamma^-1 and gamma^-1 sigma.

    Raises:
        ToleranceError: If the h and h/2 estimates disagree.
    """
    x = model.points(x)
    base = MODEL_DEFAULTS["fd_step"] if step is None else step
    h = base * (1.0 + np.linalg.norm(x, axis=-1))

    coarse_g, coarse_gs = _central(model, x, h)
    fine_g, fine_gs = _central(model, x, 0.5 * h)

    g, gs = model.reduced_coefficients(x)
    for coarse, fine, values in ((coarse_g, fine_g, g), (coarse_gs, fine_gs, gs)):
        size = 1.0 + np.max(np.abs(values)) + np.max(np.abs(fine))
        roundoff = np.finfo(float).eps / np.min(h)
        tolerance = TOLERANCES["richardson_scale"] * (np.max(h) ** 2 + roundoff) * size
        gap = float(np.max(np.abs(coarse - fine)))
        if gap > tolerance:
            raise ToleranceError(
                f"finite-difference derivatives disagree between h and h/2 "
                f"by {gap:.3g} (tolerance {tolerance:.3g})"
            )

    return DerivativeBundle(
        d_gamma_inv=(4.0 * fine_g - coarse_g) / 3.0,
        d_gamma_inv_sigma=(4.0 * fine_gs - coarse_gs) / 3.0,
    )
