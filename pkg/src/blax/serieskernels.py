"""Weights and the shifted geometric series R_{n,k}(z) = sum_j binom(n+j+k-1, j+k) z^j.

``R_n(z) = (1 - z)^{-n}`` and ``R_{n,k}`` is its k-fold backward shift.  Integer
and rational quantities are exact; function values are complex floats.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb

import numpy as np

from .corelinalg import solve_linear
from .errors import DomainError
from .report import Report

__all__ = [
    "SeriesSpec",
    "binom",
    "mu",
    "mu_float",
    "weights",
    "r_coeff",
    "r_eval",
    "r_series",
    "r_shifted_difference",
    "r_combination",
    "rnk_poly_coeffs",
    "truncated_sum",
    "truncated_sum_closed",
    "resolvent_powers",
    "rnk_matrix",
    "verify_series_identities",
    "DOMAIN_MARGIN",
]

DOMAIN_MARGIN = 1e-9


@dataclass(frozen=True)
class SeriesSpec:
    """Weight index ``n >= 1`` and shift index ``k >= 0``."""

    n: int
    k: int = 0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"n must be a positive integer, got {self.n!r}")
        if int(self.k) != self.k or self.k < 0:
            raise DomainError(f"k must be a nonnegative integer, got {self.k!r}")


def binom(a: int, b: int) -> int:
    """Binomial coefficient, zero outside ``0 <= b <= a``."""
    if b < 0 or a < 0 or b > a:
        return 0
    return comb(a, b)


def mu(n: int, j: int) -> Fraction:
    """The weight mu_{n,j} = 1 / binom(j+n-1, j) as an exact rational."""
    SeriesSpec(n)
    if j < 0:
        raise DomainError(f"j must be nonnegative, got {j}")
    return Fraction(1, comb(j + n - 1, j))


def mu_float(n: int, j: int) -> float:
    return 1.0 / comb(j + n - 1, j)


@lru_cache(maxsize=64)
def _weights(n: int, N: int):
    w = np.array([1.0 / comb(j + n - 1, j) for j in range(N + 1)])
    w.setflags(write=False)
    return w


def weights(n: int, N: int) -> np.ndarray:
    """Float weights mu_{n,0..N}."""
    return _weights(int(n), int(N))


def r_coeff(spec: SeriesSpec, j: int) -> int:
    """j-th Taylor coefficient binom(n+j+k-1, j+k) of R_{n,k}."""
    if j < 0:
        raise DomainError(f"j must be nonnegative, got {j}")
    return comb(spec.n + j + spec.k - 1, j + spec.k)


@lru_cache(maxsize=256)
def rnk_poly_coeffs(n: int, k: int) -> tuple:
    """Integer coefficients c_0..c_{n-1} with R_{n,k}(z) = R_n(z) * sum_m c_m z^m.

    c_m = sum_{j=0}^{m} (-1)^j binom(k+n-1, k+m-j) binom(n-1-m+j, j).
    """
    out = []
    for m in range(n):
        out.append(
            sum((-1) ** j * binom(k + n - 1, k + m - j) * binom(n - 1 - m + j, j) for j in range(m + 1))
        )
    return tuple(out)


def _check_domain(z):
    z = complex(z)
    if not cmath.isfinite(z):
        raise DomainError("z must be finite")
    if abs(z) > 1 - DOMAIN_MARGIN:
        raise DomainError(f"|z| = {abs(z)} is too close to or beyond the unit circle")
    return z


def r_eval(spec: SeriesSpec, z) -> complex:
    """Closed-form value of R_{n,k}(z) for |z| <= 1 - 1e-9."""
    z = _check_domain(z)
    n, k = spec.n, spec.k
    if z == 0:
        return complex(comb(n + k - 1, k))
    base = (1 - z) ** (-n)
    if k == 0:
        return base
    poly = 0j
    for c in reversed(rnk_poly_coeffs(n, k)):
        poly = poly * z + c
    return base * poly


def r_series(spec: SeriesSpec, z, N: int = 300) -> complex:
    """Partial sum of the first N Taylor terms of R_{n,k}."""
    z = complex(z)
    total = 0j
    zj = 1 + 0j
    for j in range(N):
        total += r_coeff(spec, j) * zj
        zj *= z
    return total


def r_shifted_difference(spec: SeriesSpec, z) -> complex:
    """z^{-k} (R_n(z) - sum_{j<k} binom(n+j-1, j) z^j), the defining difference quotient."""
    z = _check_domain(z)
    n, k = spec.n, spec.k
    if z == 0:
        return complex(comb(n + k - 1, k))
    head = sum(comb(n + j - 1, j) * z**j for j in range(k))
    return ((1 - z) ** (-n) - head) / z**k


def r_combination(spec: SeriesSpec, z) -> complex:
    """sum_{l=1}^{n} binom(l+k-2, l-1) R_{n-l+1}(z), valid for k >= 1."""
    z = _check_domain(z)
    n, k = spec.n, spec.k
    if k < 1:
        raise DomainError("the combination formula needs k >= 1")
    return sum(comb(ell + k - 2, ell - 1) * (1 - z) ** (-(n - ell + 1)) for ell in range(1, n + 1))


def truncated_sum(n: int, N: int, z) -> complex:
    """sum_{j=0}^{N} binom(n+j-1, j) z^j by direct summation."""
    z = complex(z)
    return sum(comb(n + j - 1, j) * z**j for j in range(N + 1))


def truncated_sum_closed(n: int, N: int, z) -> complex:
    """Closed form R_n(z) - sum_{j=1}^{n} binom(N+n, N+j) z^{N+j} / (1-z)^j."""
    z = _check_domain(z)
    tail = sum(comb(N + n, N + j) * z ** (N + j) / (1 - z) ** j for j in range(1, n + 1))
    return (1 - z) ** (-n) - tail


def resolvent_powers(A, z, m: int):
    """List [(I - zA)^0, (I - zA)^{-1}, ..., (I - zA)^{-m}]."""
    A = np.asarray(A, dtype=complex)
    d = A.shape[0]
    eye = np.eye(d, dtype=complex)
    inv = solve_linear(eye - complex(z) * A, eye)
    out = [eye]
    for _ in range(m):
        out.append(out[-1] @ inv)
    return out


def rnk_matrix(n: int, k: int, z, A, powers=None):
    """Matrix argument R_{n,k}(zA) for spectral radius of zA below one.

    For k = 0 this is (I - zA)^{-n}; for k >= 1 the resolvent combination
    sum_{l=1}^{n} binom(l+k-2, l-1) (I - zA)^{-(n-l+1)} is used.
    """
    if powers is None:
        powers = resolvent_powers(A, z, n)
    if k == 0:
        return powers[n]
    out = np.zeros_like(powers[0])
    for ell in range(1, n + 1):
        out = out + comb(ell + k - 2, ell - 1) * powers[n - ell + 1]
    return out


def verify_series_identities(n: int, k_max: int, N: int, sample_z, tol: float = 1e-10) -> Report:
    """Check the binomial and series identities behind R_{n,k}.

    Residuals (maximum over k, j and sample points):

    * ``chu_vandermonde``: number of integer failures of
      binom(n+j+k-1, j+k) = sum_l binom(l+k-2, l-1) binom(n+j-l, j), 1 <= k <= k_max, j <= N;
    * ``truncated_sum``: partial sums of R_n against the closed tail formula;
    * ``recursion``: R_{n,k} = binom(n+k-1, k) + z R_{n,k+1};
    * ``combination``: R_{n,k} against the resolvent combination, k >= 1;
    * ``polynomial_form``: r_eval against the difference quotient definition.

    Floating residuals are relative to ``max(1, |reference|, |largest term|)``;
    for the truncated-sum identity the largest term is R_n(z) itself.
    """
    SeriesSpec(n, k_max)
    zs = [complex(z) for z in sample_z]
    for z in zs:
        if abs(z) > 0.9 + 1e-12:
            raise DomainError(f"sample point {z} has modulus above 0.9")
    rep = Report()

    failures = 0
    witness = ""
    for k in range(1, k_max + 1):
        for j in range(N + 1):
            lhs = comb(n + j + k - 1, j + k)
            rhs = sum(comb(ell + k - 2, ell - 1) * comb(n + j - ell, j) for ell in range(1, n + 1))
            if lhs != rhs:
                failures += 1
                witness = witness or f"k={k}, j={j}"
    rep.add("chu_vandermonde", failures, 0, witness)

    def worst(pairs):
        res, wit = 0.0, ""
        for label, a, b, *scale in pairs:
            r = abs(a - b) / max([1.0, abs(b)] + scale)
            if r > res:
                res, wit = r, label
        return res, wit

    trunc = []
    for z in zs:
        for M in range(N + 1):
            trunc.append(
                (f"N={M}, z={z}", truncated_sum(n, M, z), truncated_sum_closed(n, M, z), abs((1 - z) ** (-n)))
            )
    res, wit = worst(trunc)
    rep.add("truncated_sum", res, tol, wit)

    rec, combo, poly = [], [], []
    for z in zs:
        for k in range(k_max + 1):
            s = SeriesSpec(n, k)
            val = r_eval(s, z)
            nxt = r_eval(SeriesSpec(n, k + 1), z)
            rec.append((f"k={k}, z={z}", comb(n + k - 1, k) + z * nxt, val))
            if k >= 1:
                combo.append((f"k={k}, z={z}", r_combination(s, z), val))
            poly.append((f"k={k}, z={z}", val, r_shifted_difference(s, z)))
    for name, pairs in (("recursion", rec), ("combination", combo), ("polynomial_form", poly)):
        res, wit = worst(pairs)
        rep.add(name, res, tol, wit)
    return rep
