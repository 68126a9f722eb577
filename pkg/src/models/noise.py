from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..common.errors import MatrixShapeError, UnstableMatrixError
from ..linalg.spectrum import as_matrix, spectral_gap, stability_report


@dataclass(frozen=True, eq=False)
class NoiseSpec:
    """Ornstein-Uhlenbeck driver ``eps dz = -A z dt + B dw``.

    Attributes:
        A (np.ndarray): n x n relaxation matrix; every eigenvalue must have
            strictly positive real part.
        B (np.ndarray): n x m forcing matrix.
    """

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = as_matrix(self.A, "A", square=True)
        B = as_matrix(self.B, "B")
        if B.shape[0] != A.shape[0]:
            raise MatrixShapeError(
                f"B must have {A.shape[0]} rows to match A, got shape {B.shape}"
            )

        report = stability_report(-A)
        if not report.is_stable:
            raise UnstableMatrixError(
                "eigenvalues of A must have strictly positive real part",
                -report.spectral_abscissa,
            )

        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @classmethod
    def identity(cls, n: int) -> "NoiseSpec":
        """Independent unit-rate components, ``A = B = I_n``."""
        return cls(np.eye(n), np.eye(n))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @cached_property
    def spectral_gap(self) -> float:
        """Min real part over the eigenvalues of A."""
        return spectral_gap(self.A)

    @cached_property
    def A_inv(self) -> np.ndarray:
        return np.linalg.inv(self.A)

    @property
    def is_identity_relaxation(self) -> bool:
        return bool(np.array_equal(self.A, np.eye(self.n)))

    def to_dict(self) -> dict:
        return {"A": self.A.tolist(), "B": self.B.tolist()}
