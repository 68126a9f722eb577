"""Dense Lyapunov and Sylvester solvers by Kronecker vectorization.

All solvers accept stacks of equations; the leading axes are a batch and the
vectorized systems are solved with LAPACK LU through ``numpy.linalg.solve``.
Row-major vectorization is used throughout:

    vec(F X)   = (F kron I) vec(X)
    vec(X G)   = (I kron G^T) vec(X)
"""

import numpy as np

from ..common.config import TOLERANCES
from ..common.errors import MatrixShapeError, SingularSystemError, UnstableMatrixError
from .spectrum import as_matrix, eigenvalues, is_symmetric


def _kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    batch = np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    out = np.einsum("...ij,...kl->...ikjl", a, b)
    return out.reshape(*batch, a.shape[-2] * b.shape[-2], a.shape[-1] * b.shape[-1])


def _solve_vectorized(K: np.ndarray, rhs: np.ndarray, validate: bool) -> np.ndarray:
    if validate:
        with np.errstate(divide="ignore", invalid="ignore"):
            rcond = 1.0 / np.linalg.cond(K, 1)
        worst = float(np.nanmin(np.where(np.isfinite(rcond), rcond, 0.0)))
        if worst < TOLERANCES["min_rcond"]:
            raise SingularSystemError("vectorized matrix equation is singular", rcond=worst)
    try:
        return np.linalg.solve(K, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError as e:
        raise SingularSystemError(f"LU factorization failed: {e}") from e


def sylvester_residual(F, G, C, X) -> float:
    """Max-norm residual of ``F X + X G - C``."""
    return float(np.max(np.abs(F @ X + X @ G - C)))


def lyapunov_residual(F, W, X) -> float:
    """Max-norm residual of ``F X + X F^T - W``."""
    return float(np.max(np.abs(F @ X + X @ np.swapaxes(F, -1, -2) - W)))


def solve_sylvester(F, G, C, validate: bool = True) -> np.ndarray:
    """Solve ``F X + X G = C`` for X.

    Args:
        F: (..., d, d) matrix.
        G: (..., n, n) matrix.
        C: (..., d, n) right-hand side.
        validate (bool): Check spectral separation and conditioning first.

    Returns:
        np.ndarray: Solution X of shape (..., d, n).

    Raises:
        MatrixShapeError: On incompatible shapes.
        SingularSystemError: If the spectra of F and -G overlap or the
            vectorized system is ill conditioned.
    """
    F = as_matrix(F, "F", square=True)
    G = as_matrix(G, "G", square=True)
    C = as_matrix(C, "C")
    d, n = F.shape[-1], G.shape[-1]
    if C.shape[-2:] != (d, n):
        raise MatrixShapeError(f"C must be {d}x{n}, got {C.shape[-2:]}")

    if validate:
        sums = eigenvalues(F)[..., :, None] + eigenvalues(G)[..., None, :]
        scale = 1.0 + max(np.max(np.abs(F)), np.max(np.abs(G)))
        gap = np.min(np.abs(sums))
        if gap <= 1e3 * np.finfo(float).eps * scale:
            raise SingularSystemError(
                "spectra of F and -G overlap", eigenvalues=sums.ravel()[:8].tolist()
            )

    K = _kron(F, np.eye(n)) + _kron(np.broadcast_to(np.eye(d), F.shape), np.swapaxes(G, -1, -2))
    batch = np.broadcast_shapes(F.shape[:-2], G.shape[:-2], C.shape[:-2])
    rhs = np.broadcast_to(C, (*batch, d, n)).reshape(*batch, d * n)
    K = np.broadcast_to(K, (*batch, d * n, d * n))
    return _solve_vectorized(K, rhs, validate).reshape(*batch, d, n)


def solve_lyapunov(F, W, validate: bool = True) -> np.ndarray:
    """Solve ``F X + X F^T = W`` for X.

    The right-hand side is used exactly as written: the stationary covariance
    of ``dY = F Y dt + S dw`` is ``solve_lyapunov(F, -S S^T)``.

    Args:
        F: (..., d, d) Hurwitz matrix.
        W: (..., d, d) symmetric right-hand side.
        validate (bool): Check stability, symmetry and conditioning first.

    Returns:
        np.ndarray: Symmetric solution X.

    Raises:
        UnstableMatrixError: If some eigenvalue of F has real part >= 0.
        MatrixShapeError: If W is not symmetric or shapes disagree.
        SingularSystemError: On an ill-conditioned Kronecker system.
    """
    F = as_matrix(F, "F", square=True)
    W = as_matrix(W, "W", square=True)
    d = F.shape[-1]
    if W.shape[-1] != d:
        raise MatrixShapeError(f"W must be {d}x{d}, got {W.shape[-2:]}")

    if validate:
        abscissa = float(np.max(eigenvalues(F).real))
        if abscissa >= 0.0:
            raise UnstableMatrixError("Lyapunov operator is not Hurwitz", abscissa)
        if not is_symmetric(W, TOLERANCES["symmetry"]):
            raise MatrixShapeError("W must be symmetric")

    X = solve_sylvester(F, np.swapaxes(F, -1, -2), W, validate=validate)
    return 0.5 * (X + np.swapaxes(X, -1, -2))
