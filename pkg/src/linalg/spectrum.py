"""Matrix validation and spectral checks."""

from dataclasses import dataclass

import numpy as np

from ..common.errors import EigenvalueError, MatrixShapeError, NonFiniteError


@dataclass(frozen=True)
class StabilityReport:
    """Outcome of a stability check.

    Attributes:
        spectral_abscissa (float): Max real part over the eigenvalues of the
            checked matrix.
        is_stable (bool): True when the abscissa is below ``-tolerance``.
    """

    spectral_abscissa: float
    is_stable: bool


def as_matrix(value, name: str = "matrix", square: bool = False) -> np.ndarray:
    """Coerce ``value`` to a finite float array with matrix trailing axes.

    Leading axes are treated as a batch, so a stack of matrices is accepted.

    Args:
        value: Array-like with at least two dimensions (scalars and vectors are
            promoted to 1x1 and column matrices).
        name (str): Name used in error messages.
        square (bool): Require the trailing two axes to be equal.

    Returns:
        np.ndarray: Float64 array of shape (..., rows, cols).

    Raises:
        MatrixShapeError: On empty or non-square input when ``square`` is set.
        NonFiniteError: If any entry is NaN or infinite.
    """
    matrix = np.asarray(value, dtype=float)
    if matrix.ndim == 0:
        matrix = matrix.reshape(1, 1)
    elif matrix.ndim == 1:
        matrix = matrix.reshape(-1, 1)

    rows, cols = matrix.shape[-2:]
    if rows < 1 or cols < 1:
        raise MatrixShapeError(f"{name} must have at least one row and column")
    if square and rows != cols:
        raise MatrixShapeError(f"{name} must be square, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise NonFiniteError(f"{name} contains non-finite entries")
    return matrix


def eigenvalues(F) -> np.ndarray:
    """Eigenvalues of a (stack of) square matrices.

    Raises:
        EigenvalueError: If the LAPACK iteration does not converge.
    """
    F = as_matrix(F, "F", square=True)
    try:
        return np.linalg.eigvals(F)
    except np.linalg.LinAlgError as e:
        raise EigenvalueError(f"eigenvalue iteration did not converge: {e}") from e


def spectral_abscissa(F):
    """Max real part over the eigenvalues of ``F``.

    Args:
        F: Square matrix or stack of square matrices.

    Returns:
        float | np.ndarray: Scalar for a single matrix, array for a stack.
    """
    abscissa = eigenvalues(F).real.max(axis=-1)
    if np.ndim(abscissa) == 0:
        return float(abscissa)
    return abscissa


def spectral_gap(F) -> float:
    """Min real part over the eigenvalues of a single matrix."""
    return float(eigenvalues(F).real.min())


def stability_report(F, tolerance: float = 0.0) -> StabilityReport:
    """Check that every eigenvalue of ``F`` has real part below ``-tolerance``.

    Callers that need eigenvalues with strictly positive real part (the OU
    relaxation matrix, the friction) pass the negated matrix.
    """
    abscissa = float(np.max(spectral_abscissa(F)))
    return StabilityReport(spectral_abscissa=abscissa, is_stable=abscissa < -tolerance)


def is_symmetric(W, tolerance: float) -> bool:
    W = np.asarray(W, dtype=float)
    scale = 1.0 + np.max(np.abs(W))
    return bool(np.max(np.abs(W - np.swapaxes(W, -1, -2))) <= tolerance * scale)
