"""Truncated weighted Bergman spaces A_n(Y), the shift S_n, and reproducing kernels.

Elements are stored by Taylor coefficients f_0..f_N with
``||f||^2 = sum_j mu_{n,j} ||f_j||^2``.  Operator-valued series (columns are
elements) are :class:`~blax.taylor.TaylorTable` objects.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass
from fractions import Fraction
from math import comb

import numpy as np
from scipy.linalg import null_space, subspace_angles

from .corelinalg import inverse, spectral_radius
from .errors import (
    ConsistencyError,
    DimensionError,
    DomainError,
    ObservabilityError,
    SingularityError,
    StabilityError,
)
from .report import Report
from .serieskernels import SeriesSpec, mu, r_eval, resolvent_powers, rnk_matrix, weights
from .statespace import GramianSet, OutputPair, gramians, random_pair
from .taylor import TaylorTable

__all__ = [
    "BergmanElement",
    "inner",
    "gram",
    "shift_apply",
    "shift_adjoint_apply",
    "shift_adjoint_power",
    "isometry_ladder_residual",
    "observability_table",
    "observability_apply",
    "model_pair",
    "model_shifted_gramian_diag",
    "cauchy_dual_checks",
    "KernelGrid",
    "KERNEL_KINDS",
    "kernel_eval",
    "default_grid_points",
    "default_grid",
    "output_kernel_factor",
    "smperp_decomposition_check",
]


@dataclass(frozen=True, eq=False)
class BergmanElement:
    n: int
    coeffs: np.ndarray  # shape (N+1, p)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.ndim == 1:
            c = c[:, None]
        if c.ndim != 2:
            raise DimensionError(f"coefficients must have shape (N+1, p), got {c.shape}")
        if self.n < 1:
            raise DomainError("n must be positive")
        object.__setattr__(self, "coeffs", c)

    @property
    def N(self):
        return self.coeffs.shape[0] - 1

    def norm_sq(self) -> float:
        w = weights(self.n, self.N)
        return float(np.sum(w * np.sum(np.abs(self.coeffs) ** 2, axis=1)))

    def norm(self) -> float:
        return self.norm_sq() ** 0.5

    def __call__(self, z):
        out = np.zeros(self.coeffs.shape[1], dtype=complex)
        for c in self.coeffs[::-1]:
            out = out * z + c
        return out


def inner(f: BergmanElement, g: BergmanElement) -> complex:
    """<f, g> = sum_j mu_{n,j} g_j^* f_j (linear in f)."""
    if f.n != g.n or f.coeffs.shape != g.coeffs.shape:
        raise DimensionError("elements live in different truncated spaces")
    w = weights(f.n, f.N)
    return complex(np.sum(w[:, None] * g.coeffs.conj() * f.coeffs))


def gram(F: TaylorTable, G: TaylorTable, n: int):
    """Matrix sum_j mu_{n,j} F_j^* G_j; entry (a, b) is <G e_b, F e_a>."""
    N = min(F.N, G.N)
    w = weights(n, N)
    return np.einsum("j,jpa,jpb->ab", w, F.coeffs[: N + 1].conj(), G.coeffs[: N + 1])


def _shift(c):
    out = np.zeros_like(c)
    out[1:] = c[:-1]
    return out


def _shift_adjoint(c, n, k=1):
    """(S_n^*)^k on coefficient arrays: g_j = (mu_{n,j+k} / mu_{n,j}) f_{j+k}."""
    N = c.shape[0] - 1
    out = np.zeros_like(c)
    if k > N:
        return out
    w = weights(n, N)
    ratio = w[k:] / w[: N + 1 - k]
    out[: N + 1 - k] = ratio.reshape((-1,) + (1,) * (c.ndim - 1)) * c[k:]
    return out


def shift_apply(f):
    """Multiplication by z (the last retained coefficient drops off)."""
    if isinstance(f, TaylorTable):
        return TaylorTable(_shift(f.coeffs))
    return BergmanElement(f.n, _shift(f.coeffs))


def shift_adjoint_apply(f, n=None):
    """S_n^*: coefficient j of the result is (j+1)/(n+j) f_{j+1}."""
    return shift_adjoint_power(f, 1, n)


def shift_adjoint_power(f, k: int, n=None):
    if isinstance(f, TaylorTable):
        if n is None:
            raise DomainError("n is required for Taylor tables")
        return TaylorTable(_shift_adjoint(f.coeffs, n, k))
    return BergmanElement(f.n, _shift_adjoint(f.coeffs, f.n, k))


def isometry_ladder_residual(f: BergmanElement) -> float:
    """|sum_j (-1)^j binom(n,j) ||S_n^{*j} f||^2 - ||f_0||^2| relative to ||f||^2."""
    n = f.n
    total = 0.0
    g = f
    for j in range(n + 1):
        total += (-1) ** j * comb(n, j) * g.norm_sq()
        g = shift_adjoint_apply(g)
    ref = float(np.sum(np.abs(f.coeffs[0]) ** 2))
    return abs(total - ref) / max(1.0, f.norm_sq())


def observability_table(pair: OutputPair, k: int, N: int) -> TaylorTable:
    """Coefficients binom(n+j+k-1, j+k) C A^j for j = 0..N (k = 0 gives the plain operator)."""
    if spectral_radius(pair.A) >= 1:
        raise StabilityError("observability operator needs spectral radius below one")
    n = pair.n
    out = np.zeros((N + 1, pair.p, pair.d), dtype=complex)
    CA = pair.C.copy()
    for j in range(N + 1):
        out[j] = comb(n + j + k - 1, j + k) * CA
        CA = CA @ pair.A
    return TaylorTable(out)


def observability_apply(pair: OutputPair, k: int, x, N: int) -> BergmanElement:
    x = np.asarray(x, dtype=complex).reshape(-1)
    if x.shape[0] != pair.d:
        raise DimensionError(f"x must have length {pair.d}")
    tab = observability_table(pair, k, N)
    return BergmanElement(pair.n, tab.coeffs @ x)


def model_pair(n: int, N: int, p: int = 1) -> OutputPair:
    """The pair (E, S_n^*) on polynomials of degree < N in the orthonormal basis z^j / sqrt(mu_{n,j}).

    In that basis S_n^* is the superdiagonal sqrt((j+1)/(n+j)) and E picks
    the constant coefficient.
    """
    sup = np.sqrt(np.array([(j + 1) / (n + j) for j in range(N - 1)]))
    A = np.diag(sup, 1)
    C = np.zeros((1, N))
    C[0, 0] = 1.0
    if p > 1:
        A = np.kron(A, np.eye(p))
        C = np.kron(C, np.eye(p))
    return OutputPair(A, C, n)


def model_shifted_gramian_diag(n: int, k: int, j: int) -> Fraction:
    """mu_{n,j} / mu_{n,j+k}, the diagonal of the shifted gramian of the model pair."""
    return mu(n, j) / mu(n, j + k)


def cauchy_dual_checks(n: int, k_max: int, N: int, pairs=None, seed: int = 0, tol: float = 1e-9) -> Report:
    """Shift relations between the shifted observability operators.

    For T_k = S^k O_{n,k} (coefficients of S^k applied to the k-shifted
    observability operator) it checks on the first N - k_max coefficients:

    * ``down_shift``: S^* T_k = T_{k-1}, 1 <= k <= k_max;
    * ``iterated_down_shift``: S^{*m} T_k = T_{k-m} (m < k) or T_0 A^{m-k} (m >= k);
    * ``cauchy_dual``: S (S^*S)^{-1} T_{k-1} = T_k, with (S^*S)^{-1} diagonal (j+n)/(j+1).
    """
    if pairs is None:
        rng = np.random.default_rng(seed)
        pairs = [random_pair(rng, n=n) for _ in range(3)]
    rep = Report()
    keep = N - k_max
    res = {"down_shift": 0.0, "iterated_down_shift": 0.0, "cauchy_dual": 0.0}
    inv_ss = np.array([(j + n) / (j + 1) for j in range(N + 1)])
    for pair in pairs:
        pair = pair.with_n(n)
        T = [observability_table(pair, k, N).shift(k).coeffs for k in range(k_max + 1)]
        scale = max(1.0, max(np.max(np.abs(t[:keep])) for t in T))
        for k in range(1, k_max + 1):
            lhs = _shift_adjoint(T[k], n)
            res["down_shift"] = max(res["down_shift"], np.max(np.abs(lhs - T[k - 1])[:keep]) / scale)
            dual = _shift(inv_ss[:, None, None] * T[k - 1])
            res["cauchy_dual"] = max(res["cauchy_dual"], np.max(np.abs(dual - T[k])[:keep]) / scale)
        for k in range(k_max + 1):
            for m in range(1, k_max + 1):
                lhs = _shift_adjoint(T[k], n, m)
                rhs = T[k - m] if m < k else T[0] @ np.linalg.matrix_power(pair.A, m - k)
                res["iterated_down_shift"] = max(res["iterated_down_shift"], np.max(np.abs(lhs - rhs)[:keep]) / scale)
    for name, val in res.items():
        rep.add(name, val, tol)
    return rep


# ---------------------------------------------------------------- kernels

KERNEL_KINDS = ("K", "kM", "frakK", "kscm", "kdif", "kE")


@dataclass(frozen=True, eq=False)
class KernelGrid:
    points: list  # list of (z, zeta)
    values: np.ndarray  # shape (P, p, p)

    def hermitian_defect(self) -> float:
        """Largest |K(z,w) - K(w,z)^*| over swapped pairs present in the grid (relative)."""
        index = {pt: i for i, pt in enumerate(self.points)}
        worst = 0.0
        for i, (z, w) in enumerate(self.points):
            j = index.get((w, z))
            if j is None:
                continue
            a, b = self.values[i], self.values[j].conj().T
            worst = max(worst, float(np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(a)))))
        return worst


def default_grid_points(moduli=(0.0, 0.3, 0.5, 0.7, 0.9), phases: int = 4):
    """Distinct points r e^{2 pi i m / phases}; the origin appears once."""
    pts = []
    for r in moduli:
        for m in range(phases):
            z = 0j if r == 0 else complex(r * cmath.exp(2j * cmath.pi * m / phases))
            if z not in pts:
                pts.append(z)
    return pts


def default_grid(moduli=(0.0, 0.3, 0.5, 0.7, 0.9), phases: int = 4):
    pts = default_grid_points(moduli, phases)
    return [(z, w) for z in pts for w in pts]


def output_kernel_factor(pair: OutputPair, k: int, z):
    """C R_{n,k}(zA), the row factor shared by all the state-space kernels."""
    powers = resolvent_powers(pair.A, z, pair.n)
    return pair.C @ rnk_matrix(pair.n, k, z, pair.A, powers)


def _checked_inverse(M, what):
    lam = np.linalg.eigvalsh(M)
    if lam[0] <= 0 or lam[-1] / lam[0] >= 1e10:
        raise ObservabilityError(f"{what} is not safely positive definite (eigenvalues {lam[0]:.3e}..{lam[-1]:.3e})")
    try:
        return inverse(M)
    except SingularityError as exc:
        raise ObservabilityError(f"{what} is singular: {exc}") from None


def kernel_eval(kind: str, pair: OutputPair, grams: GramianSet, grid, H=None, k=None) -> KernelGrid:
    """Evaluate a closed-form kernel on a list of (z, zeta) points.

    Kinds (W_k(z) = C R_{n,k}(zA), w = z conj(zeta)):

    * ``K``: W_0(z) H W_0(zeta)^*
    * ``kM``: I (1-w)^{-n} - W_0(z) G_n^{-1} W_0(zeta)^*
    * ``frakK``: w^k W_k(z) GG_k^{-1} W_k(zeta)^*
    * ``kscm``: w^k (R_{n,k}(w) I - W_k(z) GG_k^{-1} W_k(zeta)^*)
    * ``kdif``: w^k (binom(n+k-1,k) I - W_k GG_k^{-1} W_k^* + w W_{k+1} GG_{k+1}^{-1} W_{k+1}^*)
    * ``kE``: ``kdif`` with k = 0
    """
    if kind not in KERNEL_KINDS:
        raise DomainError(f"unknown kernel kind {kind!r}; expected one of {KERNEL_KINDS}")
    n, p = pair.n, pair.p
    if kind == "kE":
        kind, k = "kdif", 0
    if kind in ("frakK", "kscm", "kdif") and k is None:
        raise DomainError(f"kernel {kind} needs the shift index k")
    if kind == "kM":
        k = 0
    if kind == "K":
        if H is None:
            raise DomainError("kernel K needs H")
        H = np.asarray(H, dtype=complex)
        mids = {0: H}
    else:
        ks = [k, k + 1] if kind == "kdif" else [k]
        mids = {}
        for kk in ks:
            M = grams.G(n) if kk == 0 else grams.GG(kk)
            mids[kk] = _checked_inverse(M, f"shifted gramian k={kk}")
    cache = {}

    def W(kk, z):
        key = (kk, z)
        if key not in cache:
            cache[key] = output_kernel_factor(pair, kk, z)
        return cache[key]

    eye = np.eye(p, dtype=complex)
    vals = np.zeros((len(grid), p, p), dtype=complex)
    for i, (z, zeta) in enumerate(grid):
        z, zeta = complex(z), complex(zeta)
        w = z * zeta.conjugate()
        if kind == "K":
            v = W(0, z) @ H @ W(0, zeta).conj().T
        elif kind == "kM":
            v = eye * (1 - w) ** (-n) - W(0, z) @ mids[0] @ W(0, zeta).conj().T
        elif kind == "frakK":
            v = w**k * (W(k, z) @ mids[k] @ W(k, zeta).conj().T)
        elif kind == "kscm":
            v = w**k * (r_eval(SeriesSpec(n, k), w) * eye - W(k, z) @ mids[k] @ W(k, zeta).conj().T)
        else:
            v = w**k * (
                comb(n + k - 1, k) * eye
                - W(k, z) @ mids[k] @ W(k, zeta).conj().T
                + w * (W(k + 1, z) @ mids[k + 1] @ W(k + 1, zeta).conj().T)
            )
        vals[i] = v
    out = KernelGrid(list((complex(a), complex(b)) for a, b in grid), vals)
    defect = out.hermitian_defect()
    if defect > 1e-10:
        raise ConsistencyError(f"kernel {kind} violates Hermitian symmetry by {defect:.3e}")
    return out


# ---------------------------------------------------------------- (S^k M)^perp


def smperp_decomposition_check(pair: OutputPair, k: int, N: int, grams: GramianSet | None = None,
                               tol: float = 1e-8) -> Report:
    """Compare the complement of S^k M with polynomials of degree < k plus S^k Ran O_{n,k}.

    Here M is the orthogonal complement of Ran O_{n,C,A}.  On polynomials of
    degree < N (coordinates scaled by sqrt(mu_{n,j}) so the metric is
    Euclidean) the complement of S^k (M restricted to degree < N-k) is compared
    with the span of the constants-through-degree-(k-1) block and the
    truncated columns of S^k O_{n,k}; the residual is the largest principal angle.
    """
    if grams is None:
        grams = gramians(pair, k_max=max(k, 1), crosscheck=False)
    G = grams.G(pair.n)
    lam = np.linalg.eigvalsh(G)
    if lam[0] <= 1e-10 * max(1.0, lam[-1]):
        raise ObservabilityError("pair is not exactly observable")
    n, p, d = pair.n, pair.p, pair.d
    L = N
    if L - k < 1:
        raise DomainError("truncation must exceed k")
    sq = np.sqrt(weights(n, L - 1))

    R = observability_table(pair, 0, L - k - 1).coeffs  # (L-k, p, d)
    R = (sq[: L - k, None, None] * R).reshape((L - k) * p, d)
    M_basis = null_space(R.conj().T)  # complement of Ran O in degree < L-k

    # S^k in scaled coordinates: coefficient j -> j+k, factor sqrt(mu_{j+k}/mu_j)
    fac = np.repeat(sq[k:L] / sq[: L - k], p)
    shifted = np.zeros((L * p, M_basis.shape[1]), dtype=complex)
    shifted[k * p:] = fac[:, None] * M_basis
    lhs = null_space(shifted.conj().T)

    Ok = observability_table(pair, k, L - k - 1).coeffs  # (L-k, p, d)
    rhs_obs = np.zeros((L, p, d), dtype=complex)
    rhs_obs[k:] = Ok
    rhs_obs = (sq[:, None, None] * rhs_obs).reshape(L * p, d)
    poly = np.zeros((L * p, k * p), dtype=complex)
    poly[: k * p, : k * p] = np.eye(k * p)
    rhs = np.hstack([poly, rhs_obs])

    rep = Report()
    rep.add("dimension_mismatch", abs(lhs.shape[1] - np.linalg.matrix_rank(rhs)), 0)
    if lhs.shape[1] == np.linalg.matrix_rank(rhs):
        gap = float(np.max(subspace_angles(lhs, rhs)))
    else:
        gap = float(np.pi / 2)
    rep.add("subspace_gap", gap, tol)
    return rep
