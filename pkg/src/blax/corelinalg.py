"""Dense complex matrix helpers: spectral radius, PSD factors, guarded solves."""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, DomainError, NotPSDError, SingularityError

__all__ = [
    "as_cmatrix",
    "spectral_radius",
    "psd_factor",
    "solve_linear",
    "inverse",
    "hermitian_part",
    "hermitian_sqrt",
    "hermitian_inv_sqrt",
    "min_eigenvalue",
    "canonical_phase",
]

COND_LIMIT = 1e12


def as_cmatrix(M, name="matrix"):
    """Return ``M`` as a finite 2-D complex array, raising on NaN/Inf."""
    arr = np.array(M, dtype=complex)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} has non-finite entries")
    return arr


def _square(M, name):
    arr = as_cmatrix(M, name)
    if arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {arr.shape}")
    return arr


def spectral_radius(M) -> float:
    """Largest eigenvalue modulus of a square matrix."""
    arr = _square(M, "M")
    if arr.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(arr))))


def hermitian_part(M):
    arr = as_cmatrix(M)
    return 0.5 * (arr + arr.conj().T)


def _check_hermitian(arr, name):
    scale = max(1.0, np.linalg.norm(arr))
    if np.max(np.abs(arr - arr.conj().T), initial=0.0) > 1e-12 * scale:
        raise DomainError(f"{name} is not Hermitian")


def min_eigenvalue(M) -> float:
    """Smallest eigenvalue of the Hermitian part of ``M``."""
    arr = _square(M, "M")
    if arr.size == 0:
        return 0.0
    return float(np.linalg.eigvalsh(hermitian_part(arr))[0])


def canonical_phase(V):
    """Rotate each column so that its largest-magnitude entry is real positive."""
    V = np.array(V, dtype=complex)
    for j in range(V.shape[1]):
        col = V[:, j]
        i = int(np.argmax(np.abs(col)))
        if col[i] != 0:
            V[:, j] = col * (abs(col[i]) / col[i])
    return V


def psd_factor(M, rank_tol=None):
    """Injective factor ``V`` with ``V @ V^* == M`` for a PSD Hermitian ``M``.

    Eigenvalues at or below ``rank_tol`` are discarded, so the columns of the
    result are linearly independent.  ``rank_tol`` defaults to
    ``1e-10 * ||M||_F``.  Columns are ordered by decreasing eigenvalue and
    phase-normalized with :func:`canonical_phase`.
    """
    arr = _square(M, "M")
    _check_hermitian(arr, "M")
    arr = hermitian_part(arr)
    fro = np.linalg.norm(arr)
    if rank_tol is None:
        rank_tol = 1e-10 * fro
    if arr.shape[0] == 0:
        return np.zeros((0, 0), dtype=complex)
    w, Q = np.linalg.eigh(arr)
    if w[0] < -rank_tol:
        raise NotPSDError(
            f"matrix is not positive semidefinite: eigenvalue {w[0]:.3e} < {-rank_tol:.3e}",
            min_eigenvalue=float(w[0]),
        )
    keep = np.nonzero(w > rank_tol)[0][::-1]
    V = Q[:, keep] * np.sqrt(w[keep])
    return canonical_phase(V)


def solve_linear(A, B):
    """Solve ``A X = B`` after checking the condition number of ``A``."""
    A = _square(A, "A")
    B = as_cmatrix(B, "B") if np.ndim(B) != 1 else np.array(B, dtype=complex)
    if B.shape[0] != A.shape[0]:
        raise DimensionError(f"A is {A.shape} but B has {B.shape[0]} rows")
    cond = float(np.linalg.cond(A)) if A.size else 1.0
    if not np.isfinite(cond) or cond >= COND_LIMIT:
        raise SingularityError(f"matrix is singular to working precision (cond ~ {cond:.3e})", cond)
    return np.linalg.solve(A, B)


def inverse(A):
    A = _square(A, "A")
    return solve_linear(A, np.eye(A.shape[0], dtype=complex))


def hermitian_sqrt(M):
    """Positive square root of a PSD Hermitian matrix (tiny negative eigenvalues clipped)."""
    arr = hermitian_part(_square(M, "M"))
    w, Q = np.linalg.eigh(arr)
    scale = max(1.0, float(np.max(np.abs(w), initial=0.0)))
    if w.size and w[0] < -1e-10 * scale:
        raise NotPSDError(f"square root of indefinite matrix (eigenvalue {w[0]:.3e})", float(w[0]))
    w = np.clip(w, 0.0, None)
    return (Q * np.sqrt(w)) @ Q.conj().T


def hermitian_inv_sqrt(M):
    """Inverse positive square root of a positive definite Hermitian matrix."""
    arr = hermitian_part(_square(M, "M"))
    w, Q = np.linalg.eigh(arr)
    if w.size and (w[0] <= 0 or w[-1] / w[0] >= COND_LIMIT):
        cond = np.inf if w[0] <= 0 else w[-1] / w[0]
        raise SingularityError(f"matrix is not safely positive definite (cond ~ {cond:.3e})", cond)
    return (Q / np.sqrt(w)) @ Q.conj().T
