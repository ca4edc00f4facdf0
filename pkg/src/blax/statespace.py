"""Output pairs (C, A), their gramians, and Stein equations/inequalities.

Conventions: ``A`` is d x d, ``C`` is p x d, ``n >= 1`` is the weight index.
``Gamma_{n,A}[H] = sum_k (-1)^k binom(n,k) A*^k H A^k``.  Plain gramians are
``G_m = sum_j binom(m+j-1, j) A*^j C*C A^j`` (``G_0 = C*C``) and the shifted
gramians are ``GG_{n,k} = sum_j binom(n+j+k-1, j+k) A*^j C*C A^j``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np
from scipy.linalg import solve_discrete_lyapunov

from .corelinalg import as_cmatrix, hermitian_part, inverse, solve_linear, spectral_radius
from .errors import (
    ConsistencyError,
    ConvergenceError,
    CounterexampleError,
    DimensionError,
    DomainError,
    ObservabilityError,
    PreconditionError,
    SingularityError,
    StabilityError,
)
from .report import Report
from .serieskernels import mu_float, rnk_poly_coeffs

__all__ = [
    "OutputPair",
    "GramianSet",
    "StageColligation",
    "gamma_map",
    "stein_solve",
    "gramians",
    "gramian_series",
    "shifted_gramian_series",
    "shifted_gramian_closed",
    "classify_pair",
    "Classification",
    "stein_uniqueness_probe",
    "squeeze_check",
    "metric_constraint_check",
    "psd_status",
    "random_pair",
    "random_stable_matrix",
    "random_squeeze_instance",
]


@dataclass(frozen=True, eq=False)
class OutputPair:
    A: np.ndarray
    C: np.ndarray
    n: int

    def __post_init__(self):
        A = as_cmatrix(self.A, "A")
        C = as_cmatrix(self.C, "C")
        if A.shape[0] != A.shape[1] or A.shape[0] < 1:
            raise DimensionError(f"A must be square and nonempty, got {A.shape}")
        if C.shape[1] != A.shape[0] or C.shape[0] < 1:
            raise DimensionError(f"C must be p x {A.shape[0]}, got {C.shape}")
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"n must be a positive integer, got {self.n!r}")
        A.setflags(write=False)
        C.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "n", int(self.n))

    @property
    def d(self) -> int:
        return self.A.shape[0]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    def with_n(self, n):
        return OutputPair(self.A, self.C, n)


@dataclass(frozen=True, eq=False)
class StageColligation:
    """Input operators of stage ``k``: ``B`` is d x u, ``D`` is p x u."""

    k: int
    B: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        B = np.array(self.B, dtype=complex)
        D = np.array(self.D, dtype=complex)
        if B.ndim != 2 or D.ndim != 2 or B.shape[1] != D.shape[1]:
            raise DimensionError(f"B {B.shape} and D {D.shape} must have the same column count")
        if int(self.k) != self.k or self.k < 0:
            raise DomainError(f"stage index must be a nonnegative integer, got {self.k!r}")
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "D", D)
        object.__setattr__(self, "k", int(self.k))

    @property
    def u(self) -> int:
        return self.B.shape[1]


@dataclass
class GramianSet:
    """``plain[m] = G_m`` for m = 0..n and ``shifted[k] = GG_{n,k}``."""

    plain: list
    shifted: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.plain) - 1

    def G(self, m: int):
        return self.plain[m]

    def GG(self, k: int):
        if k not in self.shifted:
            raise KeyError(f"shifted gramian k={k} was not computed")
        return self.shifted[k]


def gamma_map(A, H, n: int):
    """Gamma_{n,A}[H] = (I - B_A)^n [H] with B_A[X] = A* X A."""
    A = as_cmatrix(A, "A")
    H = as_cmatrix(H, "H")
    if A.shape[0] != A.shape[1] or H.shape != A.shape:
        raise DimensionError(f"A {A.shape} and H {H.shape} must be square of equal size")
    if n < 0:
        raise DomainError("n must be nonnegative")
    term = H.copy()
    out = H.copy()
    Ah = A.conj().T
    for k in range(1, n + 1):
        term = Ah @ term @ A
        out = out + (-1) ** k * comb(n, k) * term
    return hermitian_part(out)


KRON_LIMIT = 32


def stein_solve(A, Q):
    """Unique Hermitian ``P`` with ``P - A* P A = Q`` (requires spectral radius < 1)."""
    A = as_cmatrix(A, "A")
    Q = as_cmatrix(Q, "Q")
    if A.shape[0] != A.shape[1] or Q.shape != A.shape:
        raise DimensionError(f"A {A.shape} and Q {Q.shape} must be square of equal size")
    rho = spectral_radius(A)
    if rho >= 1:
        raise StabilityError(f"spectral radius {rho} >= 1: the Stein equation has no unique solution")
    d = A.shape[0]
    if d > KRON_LIMIT:
        # Bartels-Stewart style solver; the Kronecker system would need d^4 storage.
        return hermitian_part(solve_discrete_lyapunov(A.conj().T, Q))
    # column-major vec: vec(A* X A) = (A^T kron A*) vec(X)
    L = np.eye(d * d, dtype=complex) - np.kron(A.T, A.conj().T)
    x = solve_linear(L, Q.reshape(-1, order="F"))
    return hermitian_part(x.reshape(d, d, order="F"))


def _series_terms(pair: OutputPair, terms: int):
    """T_j = A*^j C*C A^j for j < terms."""
    A, C = pair.A, pair.C
    Ah = A.conj().T
    T = C.conj().T @ C
    out = []
    for _ in range(terms):
        out.append(T)
        T = Ah @ T @ A
    return out


def gramian_series(pair: OutputPair, m: int, terms: int = 200, _T=None):
    """Truncated series for G_m."""
    T = _T if _T is not None else _series_terms(pair, terms)
    if m == 0:
        return T[0].copy()
    return hermitian_part(sum(comb(m + j - 1, j) * T[j] for j in range(len(T))))


def shifted_gramian_series(pair: OutputPair, k: int, terms: int = 200, _T=None):
    """Truncated series for GG_{n,k}."""
    T = _T if _T is not None else _series_terms(pair, terms)
    n = pair.n
    return hermitian_part(sum(comb(n + j + k - 1, j + k) * T[j] for j in range(len(T))))


def shifted_gramian_closed(A, Gn, n: int, k: int):
    """GG_{n,k} = sum_{m<n} c_m A*^m G_n A^m with the integer coefficients of ``rnk_poly_coeffs``."""
    A = np.asarray(A, dtype=complex)
    Ah = A.conj().T
    coeffs = rnk_poly_coeffs(n, k)
    term = np.asarray(Gn, dtype=complex)
    out = np.zeros_like(term)
    for m, c in enumerate(coeffs):
        if m:
            term = Ah @ term @ A
        out = out + c * term
    return hermitian_part(out)


def _rel(a, b):
    scale = max(np.linalg.norm(a), np.linalg.norm(b), 1e-300)
    return float(np.linalg.norm(a - b) / scale)


def gramians(pair: OutputPair, k_max: int = 9, crosscheck: bool = True, series_terms: int = 200,
             tol: float = 1e-8) -> GramianSet:
    """Plain gramians by Stein recursion and shifted gramians by the closed form.

    With ``crosscheck`` every result is compared with a ``series_terms``-term
    series; relative disagreement above ``tol`` raises :class:`ConsistencyError`.
    """
    rho = spectral_radius(pair.A)
    if rho >= 1:
        raise StabilityError(f"spectral radius {rho} >= 1: pair is not output stable")
    A, C, n = pair.A, pair.C, pair.n
    plain = [hermitian_part(C.conj().T @ C)]
    for _ in range(n):
        plain.append(stein_solve(A, plain[-1]))
    shifted = {0: plain[n]}
    for k in range(1, k_max + 1):
        shifted[k] = shifted_gramian_closed(A, plain[n], n, k)
    if crosscheck:
        T = _series_terms(pair, series_terms)
        for m in range(1, n + 1):
            err = _rel(plain[m], gramian_series(pair, m, _T=T))
            if err > tol:
                raise ConsistencyError(f"G_{m}: Stein recursion and series differ by {err:.3e}")
        for k in range(1, k_max + 1):
            err = _rel(shifted[k], shifted_gramian_series(pair, k, _T=T))
            if err > tol:
                raise ConsistencyError(f"shifted gramian k={k}: closed form and series differ by {err:.3e}")
    return GramianSet(plain, shifted)


def psd_status(M, tol: float = 1e-10, scale: float | None = None):
    """True/False for ``M >= -tol*scale``; None when exactly at the threshold."""
    M = hermitian_part(M)
    if scale is None:
        scale = np.linalg.norm(M, 2)
    lam = float(np.linalg.eigvalsh(M)[0]) if M.size else 0.0
    thr = -tol * scale
    if lam == thr:
        return None
    return bool(lam > thr)


@dataclass
class Classification:
    contractive: object  # H >= A*HA >= 0
    stein_inequality: object  # Gamma_n[H] >= C*C
    stein_equality: bool  # Gamma_n[H] == C*C
    hypercontractive: object  # Gamma_k[H] >= 0 for 0 <= k <= n
    strongly_stable: bool
    exactly_observable: bool

    @property
    def n_isometric(self):
        return bool(self.hypercontractive) and self.stein_equality

    def as_dict(self):
        return {
            "contractive": self.contractive,
            "stein_inequality": self.stein_inequality,
            "stein_equality": self.stein_equality,
            "hypercontractive": self.hypercontractive,
            "strongly_stable": self.strongly_stable,
            "exactly_observable": self.exactly_observable,
            "n_isometric": self.n_isometric,
        }


def _and3(*vals):
    if any(v is False for v in vals):
        return False
    if any(v is None for v in vals):
        return None
    return True


def classify_pair(pair: OutputPair, H, tol: float = 1e-10) -> Classification:
    """Contractivity, Stein (in)equality, hypercontractivity, stability and observability."""
    A, C, n = pair.A, pair.C, pair.n
    H = as_cmatrix(H, "H")
    if H.shape != A.shape:
        raise DimensionError(f"H {H.shape} must match A {A.shape}")
    CC = C.conj().T @ C
    scale = max(1.0, np.linalg.norm(H, 2), np.linalg.norm(CC, 2))
    AHA = A.conj().T @ H @ A
    contractive = _and3(psd_status(H - AHA, tol, scale), psd_status(AHA, tol, scale))
    gam = gamma_map(A, H, n)
    ineq = psd_status(gam - CC, tol, scale)
    eq = bool(np.max(np.abs(gam - CC)) <= tol * scale)
    hyper = _and3(*[psd_status(gamma_map(A, H, k), tol, scale) for k in range(n + 1)])
    strongly = spectral_radius(A) < 1 - 1e-10
    observable = False
    if strongly:
        G = gramians(pair, k_max=0, crosscheck=False).G(n)
        observable = float(np.linalg.eigvalsh(G)[0]) > tol
    return Classification(contractive, ineq, eq, hyper, strongly, observable)


def _series_until_converged(pair: OutputPair, max_terms: int = 100_000, tol: float = 1e-16):
    """G_n by summing the series until the terms are negligible (used when rho(A) = 1)."""
    A, C, n = pair.A, pair.C, pair.n
    Ah = A.conj().T
    T = C.conj().T @ C
    total = np.zeros_like(T)
    quiet = 0
    for j in range(max_terms):
        term = comb(n + j - 1, j) * T
        total = total + term
        if np.linalg.norm(term) <= tol * max(1.0, np.linalg.norm(total)):
            quiet += 1
            if quiet >= 50:
                return hermitian_part(total)
        else:
            quiet = 0
        T = Ah @ T @ A
    raise ConvergenceError("gramian series did not converge: pair is not output stable")


@dataclass
class UniquenessReport:
    delta: np.ndarray
    unique: bool
    G: np.ndarray
    second_solution: np.ndarray | None
    residual_G: float
    residual_second: float | None
    iterations: int

    @property
    def passed(self):
        ok = self.residual_G <= 1e-10
        if not self.unique:
            ok = ok and self.residual_second is not None and self.residual_second <= 1e-10
        return ok


def _stein_system_residual(A, C, H, n):
    """Size of the failure of H >= A*HA >= 0 and Gamma_n[H] = C*C."""
    CC = C.conj().T @ C
    AHA = A.conj().T @ H @ A
    scale = max(1.0, np.linalg.norm(H, 2))
    eq = np.linalg.norm(gamma_map(A, H, n) - CC) / scale
    m1 = max(0.0, -float(np.linalg.eigvalsh(hermitian_part(H - AHA))[0])) / scale
    m2 = max(0.0, -float(np.linalg.eigvalsh(hermitian_part(AHA))[0])) / scale
    return float(max(eq, m1, m2))


def stein_uniqueness_probe(pair: OutputPair, max_iter: int = 100_000, tol: float = 1e-12) -> UniquenessReport:
    """Decide whether G_{n,C,A} is the only PSD solution of the Stein equality system.

    ``Delta = lim A*^N A^N`` is found by iteration; if it is nonzero then
    ``G + Delta`` is a second solution, which is verified.
    """
    A, C, n = pair.A, pair.C, pair.n
    if np.linalg.norm(A, 2) > 1 + 1e-12:
        raise PreconditionError(f"A is not a contraction (norm {np.linalg.norm(A, 2):.6g})")
    Ah = A.conj().T
    P = np.eye(pair.d, dtype=complex)
    for it in range(1, max_iter + 1):
        nxt = Ah @ P @ A
        if np.linalg.norm(nxt - P) < tol:
            P = nxt
            break
        P = nxt
    else:
        raise ConvergenceError(f"A*^N A^N did not converge in {max_iter} steps")
    delta = hermitian_part(P)
    unique = bool(np.linalg.norm(delta) < 1e-10)
    if spectral_radius(A) < 1:
        G = gramians(pair, k_max=0, crosscheck=False).G(n)
    else:
        G = _series_until_converged(pair)
    res_G = _stein_system_residual(A, C, G, n)
    second = None
    res_second = None
    if not unique:
        second = G + delta
        res_second = _stein_system_residual(A, C, second, n)
    return UniquenessReport(delta, unique, G, second, res_G, res_second, it)


@dataclass
class SqueezeReport:
    n: int
    min_eigenvalues: list  # min eig of Gamma_k[H], k = 1..n-1
    scale: float

    @property
    def passed(self):
        return all(lam >= -1e-9 * self.scale for lam in self.min_eigenvalues)


def squeeze_check(A, H, n: int, tol: float = 1e-10) -> SqueezeReport:
    """Given H >= A*HA >= 0 and Gamma_n[H] >= 0 (n >= 3), confirm Gamma_k[H] >= 0 for 0 < k < n.

    Violated hypotheses raise :class:`PreconditionError`; a violated
    conclusion raises :class:`CounterexampleError`.
    """
    A = as_cmatrix(A, "A")
    H = as_cmatrix(H, "H")
    if n < 3:
        raise DomainError("the squeeze check needs n >= 3")
    if H.shape != A.shape or A.shape[0] != A.shape[1]:
        raise DimensionError("A and H must be square of equal size")
    scale = max(float(np.linalg.norm(H, 2)), 1e-300)
    AHA = A.conj().T @ H @ A
    for label, M in (("H - A*HA", H - AHA), ("A*HA", AHA), ("Gamma_n[H]", gamma_map(A, H, n))):
        lam = float(np.linalg.eigvalsh(hermitian_part(M))[0])
        if lam < -tol * scale:
            raise PreconditionError(f"hypothesis {label} >= 0 fails (min eigenvalue {lam:.3e})")
    mins = [float(np.linalg.eigvalsh(gamma_map(A, H, k))[0]) for k in range(1, n)]
    rep = SqueezeReport(n, mins, scale)
    if not rep.passed:
        raise CounterexampleError(f"Gamma_k[H] has negative eigenvalues {mins} although hypotheses hold")
    return rep


def metric_constraint_check(pair: OutputPair, stage: StageColligation, grams: GramianSet,
                            tol: float = 1e-9) -> Report:
    """Residuals of the weighted isometry/coisometry relations of one stage.

    * ``adjoint_relation``: A* GG_{k+1} B + binom(n+k-1,k) C* D
    * ``input_isometry``: I - B* GG_{k+1} B - binom(n+k-1,k) D* D
    * ``weighted_coisometry``: diag(GG_{k+1}^{-1}, mu_k I) - U diag(GG_k^{-1}, I) U*
      with U = [[A, B], [C, D]].

    Each Frobenius residual is divided by max(1, norm of the non-identity terms).
    """
    A, C, n, k = pair.A, pair.C, pair.n, stage.k
    B, D = stage.B, stage.D
    if B.shape[0] != pair.d or D.shape[0] != pair.p:
        raise DimensionError("stage dimensions do not match the pair")
    try:
        Gk, Gk1 = grams.GG(k), grams.GG(k + 1)
    except KeyError as exc:
        raise PreconditionError(str(exc)) from None
    w = comb(n + k - 1, k)
    rep = Report()
    t1, t2 = A.conj().T @ Gk1 @ B, w * C.conj().T @ D
    rep.add("adjoint_relation", np.linalg.norm(t1 + t2) / max(1.0, np.linalg.norm(t1), np.linalg.norm(t2)), tol)
    s1, s2 = B.conj().T @ Gk1 @ B, w * D.conj().T @ D
    resid = np.eye(stage.u) - s1 - s2
    rep.add("input_isometry", np.linalg.norm(resid) / max(1.0, np.linalg.norm(s1) + np.linalg.norm(s2)), tol)
    try:
        Gk_inv, Gk1_inv = inverse(Gk), inverse(Gk1)
    except SingularityError as exc:
        raise ObservabilityError(f"shifted gramian is singular: {exc}") from None
    d, p = pair.d, pair.p
    U = np.block([[A, B], [C, D]])
    mid = np.zeros((d + stage.u, d + stage.u), dtype=complex)
    mid[:d, :d] = Gk_inv
    mid[d:, d:] = np.eye(stage.u)
    target = np.zeros((d + p, d + p), dtype=complex)
    target[:d, :d] = Gk1_inv
    target[d:, d:] = mu_float(n, k) * np.eye(p)
    rep.add("weighted_coisometry", np.linalg.norm(target - U @ mid @ U.conj().T) / max(1.0, np.linalg.norm(target)), tol)
    return rep


def random_stable_matrix(rng, d: int, rho_range=(0.6, 0.9)):
    """Complex Gaussian matrix rescaled to a spectral radius drawn from ``rho_range``."""
    M = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    rho = spectral_radius(M)
    target = rng.uniform(*rho_range)
    return M * (target / rho)


def random_pair(rng, d=None, p=None, n=None, rho_range=(0.6, 0.9), d_max=4, p_max=3, n_max=4) -> OutputPair:
    """Seeded random stable pair; unspecified sizes are drawn uniformly."""
    d = int(rng.integers(1, d_max + 1)) if d is None else d
    p = int(rng.integers(1, p_max + 1)) if p is None else p
    n = int(rng.integers(1, n_max + 1)) if n is None else n
    A = random_stable_matrix(rng, d, rho_range)
    C = rng.standard_normal((p, d)) + 1j * rng.standard_normal((p, d))
    return OutputPair(A, C, n)


SQUEEZE_KINDS = ("gramian", "identity", "unitary_block")


def random_squeeze_instance(rng, n: int, kind: str | None = None, d_max: int = 4):
    """Random (A, H) satisfying the squeeze hypotheses for weight ``n``.

    * ``gramian``: H = G_{n,C,A} of a random stable pair;
    * ``identity``: H = I with ||A||^2 = 2^{1/n} - 1 scaled by a factor in (0.5, 1];
    * ``unitary_block``: A = diag(Q, S) with Q unitary, H = diag(c I, G_{n,C,S}).
    """
    kind = SQUEEZE_KINDS[int(rng.integers(len(SQUEEZE_KINDS)))] if kind is None else kind
    d = int(rng.integers(1, d_max + 1))
    if kind == "gramian":
        pair = random_pair(rng, d=d, p=int(rng.integers(1, 3)), n=n)
        return pair.A, gramians(pair, k_max=0, crosscheck=False).G(n)
    if kind == "identity":
        M = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        target = np.sqrt((2 ** (1 / n) - 1) * rng.uniform(0.5, 1.0))
        return M * (target / np.linalg.norm(M, 2)), np.eye(d, dtype=complex)
    if kind == "unitary_block":
        q = int(rng.integers(1, 3))
        Z = rng.standard_normal((q, q)) + 1j * rng.standard_normal((q, q))
        Q, _ = np.linalg.qr(Z)
        pair = random_pair(rng, d=d, p=1, n=n)
        G = gramians(pair, k_max=0, crosscheck=False).G(n)
        c = rng.uniform(0.5, 2.0)
        A = np.zeros((q + d, q + d), dtype=complex)
        A[:q, :q], A[q:, q:] = Q, pair.A
        H = np.zeros_like(A)
        H[:q, :q], H[q:, q:] = c * np.eye(q), G
        return A, H
    raise DomainError(f"unknown squeeze instance kind {kind!r}; expected one of {SQUEEZE_KINDS}")
