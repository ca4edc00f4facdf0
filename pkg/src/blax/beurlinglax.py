"""Beurling-Lax representations of shift-invariant subspaces of A_n(Y).

The subspace is M = (Ran O_{n,C,A})^perp for an exactly observable stable
pair (C, A).  Four constructions are provided:

* :func:`approach1_build` -- a partially isometric multiplier (F_1, ..., F_n)
  whose kernel sum reproduces k_M;
* :func:`approach2_predicate` -- contractive-multiplier test for a given Theta;
* :func:`build_inner_family` -- the family Theta_{n,k}, k = 0..K, from weighted
  Cholesky completions of the stage colligations;
* :func:`approach4_build` -- the single representer of the wandering subspace
  M minus S_n M.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np
from scipy.linalg import null_space

from .bergman import (
    _checked_inverse,
    default_grid,
    gram,
    kernel_eval,
    observability_table,
    output_kernel_factor,
)
from .corelinalg import (
    hermitian_inv_sqrt,
    hermitian_part,
    hermitian_sqrt,
    inverse,
    psd_factor,
    solve_linear,
    spectral_radius,
)
from .errors import (
    ConsistencyError,
    ConstructionError,
    DomainError,
    NotPSDError,
    ObservabilityError,
    StabilityError,
)
from .report import Report
from .serieskernels import mu_float, resolvent_powers, weights
from .statespace import GramianSet, OutputPair, StageColligation, gramians, metric_constraint_check
from .taylor import TaylorTable

__all__ = [
    "InnerFamily",
    "MultiplierFamily",
    "Approach4Result",
    "theta_stage",
    "theta_taylor",
    "stage_defect",
    "build_inner_family",
    "verify_inner_family",
    "defect_kernel",
    "approach1_build",
    "approach2_predicate",
    "blaschke_taylor",
    "blaschke_range_check",
    "approach4_build",
    "wandering_gap",
    "kernel_products",
    "defect_kernel_identity",
    "collapse_check",
]


def _check_point(z):
    z = complex(z)
    if abs(z) >= 1 - 1e-9:
        raise DomainError(f"|z| = {abs(z)} must be below one")
    return z


def _require_stable(pair):
    rho = spectral_radius(pair.A)
    if rho >= 1:
        raise StabilityError(f"spectral radius {rho} >= 1")


def _require_observable(pair, grams):
    G = grams.G(pair.n)
    lam = np.linalg.eigvalsh(G)
    if lam[0] <= 1e-10 * max(1.0, lam[-1]):
        raise ObservabilityError(f"G_n has smallest eigenvalue {lam[0]:.3e}: pair is not exactly observable")


# ---------------------------------------------------------------- stages


def theta_stage(pair: OutputPair, stage: StageColligation, z, grams: GramianSet | None = None):
    """Theta_{n,k}(z) = binom(k+n-1, k) D_k + z C R_{n,k+1}(zA) B_k."""
    z = _check_point(z)
    n, k = pair.n, stage.k
    return comb(k + n - 1, k) * stage.D + z * (output_kernel_factor(pair, k + 1, z) @ stage.B)


def theta_taylor(pair: OutputPair, stage: StageColligation, N: int) -> TaylorTable:
    """Taylor coefficients: binom(n+k-1, k) D_k, then binom(n+j+k-1, j+k) C A^{j-1} B_k for j >= 1."""
    _require_stable(pair)
    n, k = pair.n, stage.k
    out = np.zeros((N + 1, pair.p, stage.u), dtype=complex)
    out[0] = comb(n + k - 1, k) * stage.D
    AjB = stage.B.copy()
    for j in range(1, N + 1):
        out[j] = comb(n + j + k - 1, j + k) * (pair.C @ AjB)
        AjB = pair.A @ AjB
    return TaylorTable(out)


def stage_defect(pair: OutputPair, grams: GramianSet, k: int):
    """diag(GG_{k+1}^{-1}, mu_{n,k} I) - [A; C] GG_k^{-1} [A*, C*]."""
    A, C, n = pair.A, pair.C, pair.n
    Gk = _checked_inverse(grams.GG(k), f"shifted gramian k={k}")
    Gk1 = _checked_inverse(grams.GG(k + 1), f"shifted gramian k={k + 1}")
    d, p = pair.d, pair.p
    AC = np.vstack([A, C])
    M = np.zeros((d + p, d + p), dtype=complex)
    M[:d, :d] = Gk1
    M[d:, d:] = mu_float(n, k) * np.eye(p)
    return hermitian_part(M - AC @ Gk @ AC.conj().T)


@dataclass(eq=False)
class InnerFamily:
    pair: OutputPair
    grams: GramianSet
    stages: list
    thetas: list  # TaylorTable per stage

    @property
    def K(self):
        return len(self.stages) - 1


def build_inner_family(pair: OutputPair, K: int, N: int = 256, grams: GramianSet | None = None,
                       rank_tol=None) -> InnerFamily:
    """Stages k = 0..K from the injective Cholesky factor of the weighted defect."""
    _require_stable(pair)
    if grams is None or max(grams.shifted) < K + 1:
        grams = gramians(pair, k_max=K + 1)
    _require_observable(pair, grams)
    d = pair.d
    stages, thetas = [], []
    for k in range(K + 1):
        M = stage_defect(pair, grams, k)
        try:
            V = psd_factor(M, rank_tol)
        except NotPSDError as exc:
            raise ConstructionError(f"stage {k}: defect is not positive semidefinite ({exc})") from None
        stage = StageColligation(k, V[:d], V[d:])
        rep = metric_constraint_check(pair, stage, grams)
        if not rep.passed:
            raise ConsistencyError(f"stage {k} fails the metric constraints:\n{rep.summary()}")
        stages.append(stage)
        thetas.append(theta_taylor(pair, stage, N))
    return InnerFamily(pair, grams, stages, thetas)


def _cos_max(G_ab, G_aa, G_bb):
    """Largest |<a_i, b_j>| / (|a_i| |b_j|)."""
    if G_ab.size == 0:
        return 0.0
    na = np.sqrt(np.maximum(np.real(np.diag(G_aa)), 1e-300))
    nb = np.sqrt(np.maximum(np.real(np.diag(G_bb)), 1e-300))
    return float(np.max(np.abs(G_ab) / np.outer(na, nb)))


def kernel_products(evals_z, evals_w):
    """Array of F(z_i) F(w_j)^* for lists of matrix values."""
    return [a @ b.conj().T for a, b in zip(evals_z, evals_w)]


def verify_inner_family(fam: InnerFamily, grid=None, N: int = 256, tol: float = 1e-8) -> Report:
    """Orthogonality, isometry and kernel identities for an inner family.

    * ``orthogonal_to_observability``: <S^k Theta_k u, O x> = 0 (cosines);
    * ``orthogonal_shifts``: <S^m Theta_k u', S^k Theta_k u> = 0, m > k;
    * ``isometry``: ||S^k Theta_k u|| = ||u|| (Gram minus identity);
    * ``frakker_identity``: I/mu_k - Theta_k(z) Theta_k(w)^* against the
      difference of the two shifted state-space kernels;
    * ``factorization``: the difference kernel equals (z conj w)^k Theta_k Theta_k^*;
    * ``joint_gram``: Gram matrix of all S^k Theta_k e_i is the identity;
    * ``taylor_vs_closed``: truncated Taylor series against the closed form.
    """
    pair, grams = fam.pair, fam.grams
    n, K = pair.n, fam.K
    if grid is None:
        grid = default_grid()
    pts = sorted({complex(z) for z, _ in grid} | {complex(w) for _, w in grid}, key=lambda c: (c.real, c.imag))
    Ob = observability_table(pair, 0, N)
    G_oo = gram(Ob, Ob, n)
    rep = Report()
    res = dict.fromkeys(
        ["orthogonal_to_observability", "orthogonal_shifts", "isometry", "frakker_identity",
         "factorization", "taylor_vs_closed"], 0.0)
    shifted_all = []
    for k, (stage, tab) in enumerate(zip(fam.stages, fam.thetas)):
        tab = tab.truncate(N)
        Phi = tab.shift(k)
        shifted_all.append(Phi)
        G_pp = gram(Phi, Phi, n)
        res["isometry"] = max(res["isometry"], float(np.max(np.abs(G_pp - np.eye(stage.u)), initial=0.0)))
        res["orthogonal_to_observability"] = max(
            res["orthogonal_to_observability"], _cos_max(gram(Phi, Ob, n), G_pp, G_oo))
        for m in range(k + 1, K + 2):
            Psi = tab.shift(m)
            res["orthogonal_shifts"] = max(
                res["orthogonal_shifts"], _cos_max(gram(Psi, Phi, n), gram(Psi, Psi, n), G_pp))

        th = {z: theta_stage(pair, stage, z) for z in pts}
        for z in pts:
            diff = np.max(np.abs(tab(z) - th[z]), initial=0.0) / max(1.0, np.max(np.abs(th[z]), initial=0.0))
            res["taylor_vs_closed"] = max(res["taylor_vs_closed"], float(diff))
        Gk_inv = _checked_inverse(grams.GG(k), f"shifted gramian k={k}")
        Gk1_inv = _checked_inverse(grams.GG(k + 1), f"shifted gramian k={k + 1}")
        Wk = {z: output_kernel_factor(pair, k, z) for z in pts}
        Wk1 = {z: output_kernel_factor(pair, k + 1, z) for z in pts}
        kd = kernel_eval("kdif", pair, grams, grid, k=k)
        eye = np.eye(pair.p) / mu_float(n, k)
        for i, (z, w) in enumerate(grid):
            z, w = complex(z), complex(w)
            tt = th[z] @ th[w].conj().T
            t1 = Wk[z] @ Gk_inv @ Wk[w].conj().T
            t2 = z * w.conjugate() * (Wk1[z] @ Gk1_inv @ Wk1[w].conj().T)
            scale = max(1.0, np.max(np.abs(eye)), np.max(np.abs(t1)), np.max(np.abs(t2)))
            res["frakker_identity"] = max(res["frakker_identity"], float(np.max(np.abs(eye - tt - t1 + t2)) / scale))
            fz = (z * w.conjugate()) ** k * tt
            scale = max(1.0, np.max(np.abs(kd.values[i])), np.max(np.abs(fz)))
            res["factorization"] = max(res["factorization"], float(np.max(np.abs(kd.values[i] - fz)) / scale))
    for name, val in res.items():
        rep.add(name, val, tol)
    joint = TaylorTable(np.concatenate([t.coeffs for t in shifted_all], axis=2))
    Gj = gram(joint, joint, n)
    rep.add("joint_gram", float(np.max(np.abs(Gj - np.eye(Gj.shape[0])), initial=0.0)), tol)
    return rep


def defect_kernel(pair: OutputPair, stage: StageColligation, grams: GramianSet, z, zeta):
    """Xi_k(z, w) = Phi(z) X Phi(w)^* with Phi(z) = [z C R_{n,k+1}(zA), I/mu_{n,k}].

    X is the weighted coisometry defect of U = [[A, B_k], [C, D_k]].  For any
    stage, I/mu_k - Theta_k(z) Theta_k(w)^* equals the two-kernel difference plus Xi_k.
    """
    z, zeta = _check_point(z), _check_point(zeta)
    n, k, p = pair.n, stage.k, pair.p
    X = stage_defect(pair, grams, k) - np.vstack([stage.B, stage.D]) @ np.vstack([stage.B, stage.D]).conj().T
    inv_mu = 1.0 / mu_float(n, k)

    def row(x):
        return np.hstack([x * output_kernel_factor(pair, k + 1, x), inv_mu * np.eye(p)])

    return row(z) @ X @ row(zeta).conj().T


def defect_kernel_identity(pair: OutputPair, stage: StageColligation, grams: GramianSet, grid) -> float:
    """Largest relative residual of

    binom(n+k-1,k) I - Theta(z) Theta(w)^*
        = W_k(z) GG_k^{-1} W_k(w)^* - z conj(w) W_{k+1}(z) GG_{k+1}^{-1} W_{k+1}(w)^* + Xi_k(z, w)

    over the grid; this holds for any (B, D), not only for true stages.
    """
    n, k, p = pair.n, stage.k, pair.p
    Gk_inv = _checked_inverse(grams.GG(k), f"shifted gramian k={k}")
    Gk1_inv = _checked_inverse(grams.GG(k + 1), f"shifted gramian k={k + 1}")
    worst = 0.0
    for z, w in grid:
        z, w = complex(z), complex(w)
        tz, tw = theta_stage(pair, stage, z), theta_stage(pair, stage, w)
        lhs = comb(n + k - 1, k) * np.eye(p) - tz @ tw.conj().T
        Wz, Ww = output_kernel_factor(pair, k, z), output_kernel_factor(pair, k, w)
        Vz, Vw = output_kernel_factor(pair, k + 1, z), output_kernel_factor(pair, k + 1, w)
        rhs = Wz @ Gk_inv @ Ww.conj().T - z * w.conjugate() * (Vz @ Gk1_inv @ Vw.conj().T)
        rhs = rhs + defect_kernel(pair, stage, grams, z, w)
        worst = max(worst, float(np.max(np.abs(lhs - rhs)) / max(1.0, np.max(np.abs(lhs)))))
    return worst


def collapse_check(fam: InnerFamily, grid) -> float:
    """max over k and the grid of |Theta_k(z) Theta_k(w)^* - Theta_0(z) Theta_0(w)^*| (meaningful for n = 1)."""
    pair = fam.pair
    pts = sorted({complex(z) for z, _ in grid} | {complex(w) for _, w in grid}, key=lambda c: (c.real, c.imag))
    base = {z: theta_stage(pair, fam.stages[0], z) for z in pts}
    worst = 0.0
    for st in fam.stages[1:]:
        vals = {z: theta_stage(pair, st, z) for z in pts}
        for z, w in grid:
            a = vals[complex(z)] @ vals[complex(w)].conj().T
            b = base[complex(z)] @ base[complex(w)].conj().T
            worst = max(worst, float(np.linalg.norm(a - b, 2)))
    return worst


# ---------------------------------------------------------------- approach 1


@dataclass(eq=False)
class MultiplierFamily:
    """F_1..F_n with realizations Psi_j = D_j + z L_j (I - zA)^{-1} B_j."""

    pair: OutputPair
    grams: GramianSet
    psi: list  # index j-1 -> dict(B=..., D=..., L=...)
    entries: list  # TaylorTable for F_1..F_n
    report: Report = field(default_factory=Report)

    @property
    def n(self):
        return self.pair.n

    def psi_eval(self, j: int, z):
        z = _check_point(z)
        P = self.psi[j - 1]
        R = solve_linear(np.eye(self.pair.d) - z * self.pair.A, P["B"])
        return P["D"] + z * (P["L"] @ R)

    def evaluate(self, ell: int, z):
        """F_ell(z) = C (I - zA)^{-(n-ell)} G_{n-ell}^{-1/2} Psi_{n+1-ell}(z); F_n = Psi_1."""
        n = self.n
        if ell == n:
            return self.psi_eval(1, z)
        powers = resolvent_powers(self.pair.A, z, n - ell)
        Gm = hermitian_inv_sqrt(self.grams.G(n - ell))
        return self.pair.C @ powers[n - ell] @ Gm @ self.psi_eval(n + 1 - ell, z)


def _psi_table(L, A, B, D, N):
    out = np.zeros((N + 1, D.shape[0], D.shape[1]), dtype=complex)
    out[0] = D
    AkB = B.copy()
    for i in range(1, N + 1):
        out[i] = L @ AkB
        AkB = A @ AkB
    return TaylorTable(out)


def _resolvent_power_table(C, A, m, N):
    """Coefficients binom(m+j-1, j) C A^j of C (I - zA)^{-m}."""
    out = np.zeros((N + 1, C.shape[0], A.shape[0]), dtype=complex)
    CA = C.copy()
    for j in range(N + 1):
        out[j] = comb(m + j - 1, j) * CA
        CA = CA @ A
    return TaylorTable(out)


def approach1_build(pair: OutputPair, grid=None, N: int = 256, grams: GramianSet | None = None,
                    tol: float = 1e-8) -> MultiplierFamily:
    """Partially isometric multiplier F = (F_1, ..., F_n) with k_M = sum_l F_l F_l^* / (1 - z conj w)^l.

    Psi_1 comes from the Cholesky completion of diag(G_1^{-1}, I) - [A; C] G_1^{-1} [A*, C*];
    for j >= 2, B_j = (G_j^{-1} - A G_j^{-1} A^*)^{1/2} and D_j = -G_{j-1}^{-1/2} A^* G_j B_j.
    """
    _require_stable(pair)
    if grams is None:
        grams = gramians(pair, k_max=1)
    _require_observable(pair, grams)
    A, C, n, d, p = pair.A, pair.C, pair.n, pair.d, pair.p
    G1_inv = _checked_inverse(grams.G(1), "G_1")
    AC = np.vstack([A, C])
    M = -AC @ G1_inv @ AC.conj().T
    M[:d, :d] += G1_inv
    M[d:, d:] += np.eye(p)
    V = psd_factor(hermitian_part(M))
    psi = [dict(B=V[:d], D=V[d:], L=C.copy())]
    for j in range(2, n + 1):
        Gj_inv = _checked_inverse(grams.G(j), f"G_{j}")
        Bj = hermitian_sqrt(Gj_inv - A @ Gj_inv @ A.conj().T)
        Dj = -hermitian_inv_sqrt(grams.G(j - 1)) @ A.conj().T @ grams.G(j) @ Bj
        psi.append(dict(B=Bj, D=Dj, L=hermitian_sqrt(grams.G(j - 1))))
    entries = []
    for ell in range(1, n + 1):
        j = n + 1 - ell
        P = psi[j - 1]
        ptab = _psi_table(P["L"], A, P["B"], P["D"], N)
        if ell == n:
            entries.append(ptab)
        else:
            pre = _resolvent_power_table(C, A, n - ell, N) @ hermitian_inv_sqrt(grams.G(n - ell))
            entries.append(pre @ ptab)
    fam = MultiplierFamily(pair, grams, psi, entries)
    fam.report = _verify_approach1(fam, grid if grid is not None else default_grid(), tol)
    return fam


def _verify_approach1(fam: MultiplierFamily, grid, tol):
    pair, grams = fam.pair, fam.grams
    A, n, d = pair.A, pair.n, pair.d
    pts = sorted({complex(z) for z, _ in grid} | {complex(w) for _, w in grid}, key=lambda c: (c.real, c.imag))
    rep = Report()
    eye_d = np.eye(d)
    res1 = 0.0
    alt = 0.0
    alt_done = False
    for j in range(1, n + 1):
        P = fam.psi[j - 1]
        vals = {z: fam.psi_eval(j, z) for z in pts}
        Gj_inv = _checked_inverse(grams.G(j), f"G_{j}")
        outer = {z: P["L"] @ solve_linear(eye_d - z * A, eye_d) for z in pts}
        for z, w in grid:
            z, w = complex(z), complex(w)
            lhs = (np.eye(vals[z].shape[0]) - vals[z] @ vals[w].conj().T) / (1 - z * w.conjugate())
            rhs = outer[z] @ Gj_inv @ outer[w].conj().T
            res1 = max(res1, float(np.max(np.abs(lhs - rhs)) / max(1.0, np.max(np.abs(rhs)))))
        if j >= 2 and np.linalg.cond(P["B"]) < 1e10:
            alt_done = True
            Binv = inverse(P["B"])
            for z in pts:
                other = outer[z] @ Gj_inv @ (z * eye_d - A.conj().T) @ Binv
                alt = max(alt, float(np.max(np.abs(other - vals[z])) / max(1.0, np.max(np.abs(vals[z])))))
    rep.add("psi_kernel_identity", res1, tol)
    if alt_done:
        rep.add("alternate_form", alt, tol)
    kM = kernel_eval("kM", pair, grams, grid)
    Fv = {(ell, z): fam.evaluate(ell, z) for ell in range(1, n + 1) for z in pts}
    res2 = 0.0
    for i, (z, w) in enumerate(grid):
        z, w = complex(z), complex(w)
        s = sum(Fv[(ell, z)] @ Fv[(ell, w)].conj().T / (1 - z * w.conjugate()) ** ell for ell in range(1, n + 1))
        res2 = max(res2, float(np.max(np.abs(kM.values[i] - s)) / max(1.0, np.max(np.abs(kM.values[i])))))
    rep.add("sum_kernel_factorization", res2, tol)
    res3 = 0.0
    for ell, tab in enumerate(fam.entries, start=1):
        for z in pts:
            v = Fv[(ell, z)]
            res3 = max(res3, float(np.max(np.abs(tab(z) - v)) / max(1.0, np.max(np.abs(v)))))
    rep.add("taylor_vs_closed", res3, tol)
    return rep


# ---------------------------------------------------------------- approach 2


def _multiplication_matrix(theta: TaylorTable, n: int, N: int):
    """Weighted matrix of f -> P_N (Theta f) on polynomials of degree <= N."""
    c = theta.truncate(N).coeffs
    p, m = c.shape[1:]
    T = np.zeros(((N + 1) * p, (N + 1) * m), dtype=complex)
    for i in range(N + 1):
        for j in range(i + 1):
            T[i * p:(i + 1) * p, j * m:(j + 1) * m] = c[i - j]
    w = np.sqrt(weights(n, N))
    left = np.repeat(w, p)
    right = np.repeat(1.0 / w, m)
    return left[:, None] * T * right[None, :]


def blaschke_taylor(alpha, N: int) -> TaylorTable:
    """Coefficients of b_alpha(z) = (z - alpha) / (1 - z conj(alpha))."""
    a = complex(alpha)
    ac = a.conjugate()
    c = np.zeros((N + 1, 1, 1), dtype=complex)
    c[0, 0, 0] = -a
    for j in range(1, N + 1):
        # z ac^{j-1} - a ac^j
        c[j, 0, 0] = ac ** (j - 1) * (1 - abs(a) ** 2)
    return TaylorTable(c)


def blaschke_range_check(alpha, n: int, N: int, extra: int = 200):
    """How far b_alpha * (polynomials of degree <= N) is from {f : f(alpha) = 0}, and back.

    ``forward``: for g = z^i, the distance of b_alpha g (truncated at N + extra)
    from the zero-based subspace, relative to its norm.  ``reverse``: each
    (z - alpha) z^i equals b_alpha times the polynomial (1 - z conj(alpha)) z^i.
    """
    a = complex(alpha)
    L = N + extra
    b = blaschke_taylor(a, L).coeffs[:, 0, 0]
    w = weights(n, L)
    kern = np.array([a.conjugate() ** j / w[j] for j in range(L + 1)])  # kernel at alpha
    kern_norm = np.sqrt(np.sum(w * np.abs(kern) ** 2))
    powers = a ** np.arange(L + 1)
    fwd = 0.0
    for i in range(N + 1):
        f = np.zeros(L + 1, dtype=complex)
        f[i:] = b[: L + 1 - i]
        val = np.dot(f, powers)
        fnorm = np.sqrt(np.sum(w * np.abs(f) ** 2))
        fwd = max(fwd, abs(val) / (kern_norm * fnorm))
    rev = 0.0
    for i in range(N):
        g = np.zeros(L + 1, dtype=complex)
        g[i] = 1
        g[i + 1] = -a.conjugate()
        prod = np.convolve(b, g)[: L + 1]
        target = np.zeros(L + 1, dtype=complex)
        target[i] = -a
        target[i + 1] = 1
        diff = prod - target
        rev = max(rev, np.sqrt(np.sum(w * np.abs(diff) ** 2)) / np.sqrt(np.sum(w * np.abs(target) ** 2)))
    return float(fwd), float(rev)


def approach2_predicate(theta: TaylorTable, n: int, N: int | None = None, alpha=None, tol: float = 1e-8) -> Report:
    """Largest singular value of the truncated weighted multiplication matrix of Theta.

    ``contractive`` passes when the norm is at most 1 + tol.  With ``alpha`` the
    range of b_alpha is also compared with the zero-based subspace.
    """
    N = theta.N if N is None else N
    T = _multiplication_matrix(theta, n, N)
    norm = float(np.linalg.norm(T, 2)) if T.size else 0.0
    rep = Report(data={"norm": norm})
    rep.add("contractive", max(0.0, norm - 1.0), tol, f"norm {norm:.12g}")
    if alpha is not None:
        fwd, rev = blaschke_range_check(alpha, n, N)
        rep.add("range_in_zero_set", fwd, tol)
        rep.add("zero_set_in_range", rev, tol)
    return rep


# ---------------------------------------------------------------- approach 4


@dataclass(eq=False)
class Approach4Result:
    stage: StageColligation
    theta: TaylorTable
    report: Report

    def __call__(self, z):
        return self._eval(z)


def _approach4_eval(pair, stage, z):
    """Theta(z) = D + z C sum_{j=1}^{n} (I - zA)^{-j} B."""
    z = _check_point(z)
    powers = resolvent_powers(pair.A, z, pair.n)
    S = sum(powers[1:])
    return stage.D + z * (pair.C @ S @ stage.B)


def _approach4_taylor(pair, stage, N):
    n, A = pair.n, pair.A
    out = np.zeros((N + 1, pair.p, stage.u), dtype=complex)
    out[0] = stage.D
    AkB = stage.B.copy()
    for i in range(1, N + 1):
        weight = sum(comb(j + i - 2, i - 1) for j in range(1, n + 1))
        out[i] = weight * (pair.C @ AkB)
        AkB = A @ AkB
    return TaylorTable(out)


def wandering_gap(pair: OutputPair, theta: TaylorTable, degree: int = 6, span: int = 40, N: int = 256) -> float:
    """Relative least-squares error of approximating polynomials in M by sums of S^j Theta u.

    Polynomials of degree < ``degree`` lying in M are approximated by
    combinations of z^j Theta(z) e_i, j < ``span``, in the truncated A_n norm.
    """
    n, p = pair.n, pair.p
    w = np.sqrt(weights(n, N))
    R = observability_table(pair, 0, degree - 1).coeffs
    R = (w[:degree, None, None] * R).reshape(degree * p, pair.d)
    basis = null_space(R.conj().T)  # scaled coordinates, degree < `degree`
    if basis.shape[1] == 0:
        return 0.0
    targets = np.zeros(((N + 1) * p, basis.shape[1]), dtype=complex)
    targets[: degree * p] = basis
    cols = []
    th = theta.truncate(N)
    for j in range(span):
        c = th.shift(j).coeffs  # (N+1, p, u)
        cols.append((w[:, None, None] * c).reshape((N + 1) * p, -1))
    S = np.hstack(cols)
    coef, *_ = np.linalg.lstsq(S, targets, rcond=None)
    resid = targets - S @ coef
    return float(np.max(np.linalg.norm(resid, axis=0) / np.linalg.norm(targets, axis=0)))


def approach4_build(pair: OutputPair, grid=None, N: int = 256, grams: GramianSet | None = None,
                    shifts: int = 8, tol: float = 1e-8, family: InnerFamily | None = None) -> Approach4Result:
    """Representer Theta of the wandering subspace E = M minus S_n M.

    (B, D) is the injective factor of diag(GG_{n,1}^{-1}, I) - [A; C] G_n^{-1} [A*, C*].
    """
    _require_stable(pair)
    if grams is None:
        grams = gramians(pair, k_max=1)
    _require_observable(pair, grams)
    A, C, n, d, p = pair.A, pair.C, pair.n, pair.d, pair.p
    Gn_inv = _checked_inverse(grams.G(n), "G_n")
    G1_inv = _checked_inverse(grams.GG(1), "shifted gramian k=1")
    AC = np.vstack([A, C])
    M = -AC @ Gn_inv @ AC.conj().T
    M[:d, :d] += G1_inv
    M[d:, d:] += np.eye(p)
    try:
        V = psd_factor(hermitian_part(M))
    except NotPSDError as exc:
        raise ConstructionError(f"wandering-subspace defect is not positive semidefinite ({exc})") from None
    stage = StageColligation(0, V[:d], V[d:])
    theta = _approach4_taylor(pair, stage, N)
    grid = grid if grid is not None else default_grid()
    pts = sorted({complex(z) for z, _ in grid} | {complex(w) for _, w in grid}, key=lambda c: (c.real, c.imag))
    vals = {z: _approach4_eval(pair, stage, z) for z in pts}
    rep = Report()
    kE = kernel_eval("kE", pair, grams, grid)
    res = 0.0
    for i, (z, w) in enumerate(grid):
        tt = vals[complex(z)] @ vals[complex(w)].conj().T
        res = max(res, float(np.max(np.abs(kE.values[i] - tt)) / max(1.0, np.max(np.abs(tt)))))
    rep.add("wandering_kernel", res, tol)
    G00 = gram(theta, theta, n)
    rep.add("isometry", float(np.max(np.abs(G00 - np.eye(stage.u)), initial=0.0)), tol)
    orth = 0.0
    for k in range(1, shifts + 1):
        Sk = theta.shift(k)
        orth = max(orth, _cos_max(gram(theta, Sk, n), G00, gram(Sk, Sk, n)))
    rep.add("wandering_orthogonality", orth, tol)
    tv = 0.0
    for z in pts:
        tv = max(tv, float(np.max(np.abs(theta(z) - vals[z])) / max(1.0, np.max(np.abs(vals[z])))))
    rep.add("taylor_vs_closed", tv, tol)
    if family is not None:
        st0 = family.stages[0]
        diff = 0.0
        for z, w in grid:
            a = vals[complex(z)] @ vals[complex(w)].conj().T
            t0z, t0w = theta_stage(pair, st0, z), theta_stage(pair, st0, w)
            b = t0z @ t0w.conj().T
            diff = max(diff, float(np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(a)))))
        rep.add("matches_stage_zero", diff, tol)
    res_obj = Approach4Result(stage, theta, rep)
    res_obj._eval = lambda z: _approach4_eval(pair, stage, z)
    return res_obj
