"""Fixed-size complex linear algebra for 2x2 and 4x4 matrices.

Matrices are plain complex128 numpy arrays. The Hermitian eigensolver is
a cyclic Jacobi iteration specialized to 4x4 (shared with the compiled
integration loops), so the projection applied inside trajectories and the
one exposed here are the same code path.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from . import _kernels

__all__ = [
    "NonHermitianError",
    "NotPositiveSemidefiniteError",
    "EigDecomp",
    "kron",
    "commutator",
    "dagger",
    "hermitize",
    "herm_eig",
    "psd_sqrt",
    "max_abs",
]

HERMITIAN_ATOL = 1e-9
PSD_EIG_FLOOR = -1e-10


class NonHermitianError(ValueError):
    """Input matrix deviates from Hermitian beyond the accepted tolerance."""


class NotPositiveSemidefiniteError(ValueError):
    """Input matrix has an eigenvalue below the accepted PSD floor."""


class EigDecomp(NamedTuple):
    """Eigenvalues ascending; eigenvectors as matching orthonormal columns."""

    values: np.ndarray
    vectors: np.ndarray


def _as_complex(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.complex128)


def kron(a, b) -> np.ndarray:
    """Kronecker product; (a kron b)[2i+k, 2j+l] = a[i,j] b[k,l]."""
    return np.kron(_as_complex(a), _as_complex(b))


def commutator(a, b) -> np.ndarray:
    a = _as_complex(a)
    b = _as_complex(b)
    return a @ b - b @ a


def dagger(a) -> np.ndarray:
    return _as_complex(a).conj().T


def hermitize(a) -> np.ndarray:
    a = _as_complex(a)
    return 0.5 * (a + a.conj().T)


def max_abs(a) -> float:
    return float(np.max(np.abs(a)))


def herm_eig(a, atol: float = HERMITIAN_ATOL) -> EigDecomp:
    """Eigendecomposition of a 4x4 Hermitian matrix via cyclic Jacobi.

    The input may deviate from exact Hermiticity by at most `atol` in
    max-norm; it is symmetrized internally before diagonalization.
    """
    a = _as_complex(a)
    if a.shape != (4, 4):
        raise ValueError(f"expected a 4x4 matrix, got shape {a.shape}")
    asym = max_abs(a - a.conj().T)
    if asym > atol:
        raise NonHermitianError(
            f"matrix is not Hermitian: max asymmetry {asym:.3e} > {atol:.1e}"
        )
    work = hermitize(a)
    w = np.empty(4, dtype=np.float64)
    v = np.empty((4, 4), dtype=np.complex128)
    _kernels.jacobi_eigh4(work, w, v)
    return EigDecomp(w, v)


def psd_sqrt(a, atol: float = HERMITIAN_ATOL) -> np.ndarray:
    """Hermitian PSD square root.

    Eigenvalues in [-1e-10, 0) are clipped to zero; anything more negative
    raises NotPositiveSemidefiniteError.
    """
    w, v = herm_eig(a, atol=atol)
    if w[0] < PSD_EIG_FLOOR:
        raise NotPositiveSemidefiniteError(
            f"matrix has negative eigenvalue {w[0]:.3e}"
        )
    w = np.maximum(w, 0.0)
    return (v * np.sqrt(w)) @ v.conj().T
