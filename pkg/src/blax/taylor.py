"""Matrix-valued truncated power series."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError

__all__ = ["TaylorTable"]


@dataclass(frozen=True, eq=False)
class TaylorTable:
    """Coefficients ``coeffs[j]`` (each p x m) of sum_j coeffs[j] z^j, j = 0..N."""

    coeffs: np.ndarray

    # let ndarray @ table dispatch to __rmatmul__
    __array_ufunc__ = None

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.ndim != 3:
            raise DimensionError(f"Taylor coefficients must have shape (N+1, p, m), got {c.shape}")
        object.__setattr__(self, "coeffs", c)

    @property
    def N(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def shape(self):
        return self.coeffs.shape[1:]

    @classmethod
    def zeros(cls, N, p, m):
        return cls(np.zeros((N + 1, p, m), dtype=complex))

    @classmethod
    def constant(cls, M, N):
        M = np.atleast_2d(np.asarray(M, dtype=complex))
        c = np.zeros((N + 1,) + M.shape, dtype=complex)
        c[0] = M
        return cls(c)

    def __call__(self, z):
        """Horner evaluation of the truncated series."""
        out = np.zeros(self.shape, dtype=complex)
        for c in self.coeffs[::-1]:
            out = out * z + c
        return out

    def shift(self, k: int) -> "TaylorTable":
        """Multiply by z^k, keeping the truncation order."""
        c = np.zeros_like(self.coeffs)
        if k <= self.N:
            c[k:] = self.coeffs[: self.N + 1 - k]
        return TaylorTable(c)

    def truncate(self, N: int) -> "TaylorTable":
        if N > self.N:
            c = np.zeros((N + 1,) + self.shape, dtype=complex)
            c[: self.N + 1] = self.coeffs
            return TaylorTable(c)
        return TaylorTable(self.coeffs[: N + 1].copy())

    def __matmul__(self, other):
        """Cauchy product with another table (or right multiplication by a matrix)."""
        if not isinstance(other, TaylorTable):
            return TaylorTable(self.coeffs @ np.asarray(other, dtype=complex))
        N = min(self.N, other.N)
        if self.shape[1] != other.shape[0]:
            raise DimensionError(f"cannot multiply {self.shape} by {other.shape}")
        a, b = self.coeffs[: N + 1], other.coeffs[: N + 1]
        out = np.zeros((N + 1, self.shape[0], other.shape[1]), dtype=complex)
        for i in range(N + 1):
            out[i:] += np.einsum("ab,jbc->jac", a[i], b[: N + 1 - i])
        return TaylorTable(out)

    def __rmatmul__(self, M):
        return TaylorTable(np.asarray(M, dtype=complex) @ self.coeffs)

    def __add__(self, other):
        return TaylorTable(self.coeffs + other.coeffs)

    def __sub__(self, other):
        return TaylorTable(self.coeffs - other.coeffs)

    def __mul__(self, s):
        return TaylorTable(self.coeffs * s)

    __rmul__ = __mul__

    def columns(self, idx):
        return TaylorTable(self.coeffs[:, :, idx])
