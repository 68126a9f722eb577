"""Exception hierarchy shared by every package area."""

from typing import Optional, Sequence


class InertialDriftError(Exception):
    """Base class for all errors raised by this package."""


class MatrixShapeError(InertialDriftError, ValueError):
    """A matrix argument has the wrong number of dimensions or incompatible shape."""


class NonFiniteError(InertialDriftError, ValueError):
    """An input or state contains NaN or infinite entries."""


class UnstableMatrixError(InertialDriftError):
    """A matrix that must be Hurwitz (or anti-Hurwitz) is not.

    Args:
        message (str): Human readable description.
        spectral_abscissa (float): Max real part of the offending spectrum.
    """

    def __init__(self, message: str, spectral_abscissa: float):
        super().__init__(f"{message} (spectral abscissa {spectral_abscissa:.6g})")
        self.spectral_abscissa = spectral_abscissa


class SingularSystemError(InertialDriftError):
    """A vectorized matrix equation is numerically singular.

    Args:
        message (str): Human readable description.
        rcond (Optional[float]): Reciprocal condition estimate of the system.
        eigenvalues (Optional[Sequence[complex]]): Offending eigenvalue sums, if known.
    """

    def __init__(
        self,
        message: str,
        rcond: Optional[float] = None,
        eigenvalues: Optional[Sequence[complex]] = None,
    ):
        details = []
        if rcond is not None:
            details.append(f"rcond {rcond:.3g}")
        if eigenvalues is not None:
            details.append(f"eigenvalues {list(eigenvalues)}")
        suffix = f" ({', '.join(details)})" if details else ""
        super().__init__(message + suffix)
        self.rcond = rcond
        self.eigenvalues = eigenvalues


class EigenvalueError(InertialDriftError):
    """Eigenvalue iteration failed to converge."""


class FrictionBoundError(InertialDriftError):
    """The symmetrized friction leaves the declared [gamma0, gamma1] band."""


class ToleranceError(InertialDriftError):
    """A numerical self-consistency check (e.g. Richardson) failed."""


class ModelBoundError(InertialDriftError):
    """A turbulence model violates its declared bounds or divergence-free constraint."""


class ConfigError(InertialDriftError, ValueError):
    """Invalid run configuration.

    Args:
        message (str): Human readable description.
        key_path (str): Dotted path of the offending key.
    """

    def __init__(self, message: str, key_path: str = ""):
        prefix = f"{key_path}: " if key_path else ""
        super().__init__(prefix + message)
        self.key_path = key_path


class BlowUpError(InertialDriftError):
    """A trajectory produced a non-finite state.

    Args:
        message (str): Human readable description.
        trajectory_index (int): Index of the failing trajectory.
    """

    def __init__(self, message: str, trajectory_index: int = -1):
        super().__init__(f"trajectory {trajectory_index}: {message}")
        self.trajectory_index = trajectory_index


class InvalidReportError(InertialDriftError):
    """An ensemble had too many flagged trajectories to be trusted."""


class ClosedFormError(InertialDriftError, ValueError):
    """A closed-form shortcut was requested outside the case it covers."""
