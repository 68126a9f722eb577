"""Matrix exponential by scaling and squaring with a degree-13 Pade approximant.

Works on single matrices and on stacks of matrices; each matrix in a stack
gets its own scaling exponent.
"""

import numpy as np

from ..common.errors import NonFiniteError
from .spectrum import as_matrix

_PADE13 = (
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
)
_THETA13 = 5.371920351148152


def _pade13(A: np.ndarray) -> np.ndarray:
    b = _PADE13
    ident = np.broadcast_to(np.eye(A.shape[-1]), A.shape)
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A4 @ A2
    U = A @ (
        A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
        + b[7] * A6
        + b[5] * A4
        + b[3] * A2
        + b[1] * ident
    )
    V = (
        A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
        + b[6] * A6
        + b[4] * A4
        + b[2] * A2
        + b[0] * ident
    )
    return np.linalg.solve(V - U, V + U)


def matrix_exponential(F, t: float = 1.0) -> np.ndarray:
    """Compute ``exp(t F)``.

    Args:
        F: Square matrix, or a stack of square matrices of shape (..., d, d).
        t (float): Finite time factor.

    Returns:
        np.ndarray: The matrix exponential, same shape as ``F``.

    Raises:
        MatrixShapeError: If ``F`` is not square.
        NonFiniteError: If ``F`` or ``t`` is not finite.
    """
    F = as_matrix(F, "F", square=True)
    t = float(t)
    if not np.isfinite(t):
        raise NonFiniteError("t must be finite")
    A = F * t

    norm1 = np.abs(A).sum(axis=-2).max(axis=-1)
    with np.errstate(divide="ignore"):
        exponents = np.ceil(np.log2(norm1 / _THETA13))
    exponents = np.where(np.isfinite(exponents), np.maximum(exponents, 0), 0).astype(int)

    A = A / np.power(2.0, exponents)[..., None, None]
    R = _pade13(A)

    for k in range(int(np.max(exponents))):
        squared = R @ R
        R = np.where((k < exponents)[..., None, None], squared, R)
    return R
