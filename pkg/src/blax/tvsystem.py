"""The binomially weighted time-varying system driven by an inner family.

    x(j+1) = ((j+n)/(j+1)) A x(j) + binom(j+n, j+1) B_j u(j)
    y(j)   = C x(j) + binom(j+n-1, j) D_j u(j)

Its output string y(0), y(1), ... is the Taylor series of
O_{n,C,A} x(0) + sum_k z^k Theta_{n,k}(z) u(k).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .bergman import observability_table
from .beurlinglax import theta_taylor
from .corelinalg import inverse
from .errors import DimensionError, DomainError
from .report import Report
from .serieskernels import weights
from .statespace import GramianSet, OutputPair, StageColligation
from .taylor import TaylorTable

__all__ = [
    "SystemSpec",
    "SignalTrace",
    "simulate",
    "closed_form_trace",
    "output_series",
    "ztransform_reconcile",
    "energy_audit",
    "weighted_colligation_audit",
    "weighted_system_matrix",
    "weighted_isometry_defect",
]


@dataclass(frozen=True, eq=False)
class SystemSpec:
    pair: OutputPair
    stages: tuple

    def __post_init__(self):
        stages = tuple(self.stages)
        for idx, st in enumerate(stages):
            if st.k != idx:
                raise DomainError(f"stage indices must run 0, 1, ...; position {idx} holds k={st.k}")
            if st.B.shape[0] != self.pair.d or st.D.shape[0] != self.pair.p:
                raise DimensionError(f"stage {idx} does not match the pair dimensions")
        object.__setattr__(self, "stages", stages)

    @property
    def n(self):
        return self.pair.n

    @property
    def K(self):
        return len(self.stages) - 1

    @classmethod
    def from_family(cls, fam):
        return cls(fam.pair, tuple(fam.stages))


@dataclass(frozen=True, eq=False)
class SignalTrace:
    inputs: list  # u(0..T)
    states: list  # x(0..T+1)
    outputs: list  # y(0..T)

    @property
    def T(self):
        return len(self.outputs) - 1


def _inputs(spec, inputs, T):
    if T > spec.K:
        raise DomainError(f"T = {T} exceeds the last stage K = {spec.K}")
    if len(inputs) < T + 1:
        raise DimensionError(f"need inputs u(0..{T}), got {len(inputs)}")
    out = []
    for j in range(T + 1):
        u = np.asarray(inputs[j], dtype=complex).reshape(-1)
        if u.shape[0] != spec.stages[j].u:
            raise DimensionError(f"step {j}: input has length {u.shape[0]}, stage expects {spec.stages[j].u}")
        out.append(u)
    return out


def simulate(spec: SystemSpec, x0, inputs, T: int) -> SignalTrace:
    """Run the recursion for j = 0..T."""
    A, C, n = spec.pair.A, spec.pair.C, spec.n
    us = _inputs(spec, inputs, T)
    x = np.asarray(x0, dtype=complex).reshape(-1)
    if x.shape[0] != spec.pair.d:
        raise DimensionError(f"x0 must have length {spec.pair.d}")
    states, outputs = [x], []
    for j in range(T + 1):
        st = spec.stages[j]
        outputs.append(C @ x + comb(j + n - 1, j) * (st.D @ us[j]))
        x = ((j + n) / (j + 1)) * (A @ x) + comb(j + n, j + 1) * (st.B @ us[j])
        states.append(x)
    return SignalTrace(us, states, outputs)


def closed_form_trace(spec: SystemSpec, x0, inputs, T: int) -> SignalTrace:
    """Explicit sums: x(j) = binom(n+j-1, j) (A^j x0 + sum_{l<j} A^{j-l-1} B_l u(l))."""
    A, C, n = spec.pair.A, spec.pair.C, spec.n
    us = _inputs(spec, inputs, T)
    x0 = np.asarray(x0, dtype=complex).reshape(-1)
    d = spec.pair.d
    powers = [np.eye(d, dtype=complex)]
    for _ in range(T + 1):
        powers.append(powers[-1] @ A)
    states, outputs = [], []
    for j in range(T + 2):
        inner = powers[j] @ x0
        for ell in range(min(j, T + 1)):
            inner = inner + powers[j - ell - 1] @ (spec.stages[ell].B @ us[ell])
        states.append(comb(n + j - 1, j) * inner)
    for j in range(T + 1):
        inner = C @ (states[j] / comb(n + j - 1, j)) + spec.stages[j].D @ us[j]
        outputs.append(comb(n + j - 1, j) * inner)
    return SignalTrace(us, states, outputs)


def output_series(spec: SystemSpec, x0, inputs, N: int) -> TaylorTable:
    """Coefficients 0..N of O x0 + sum_k z^k Theta_{n,k}(z) u(k) (inputs with k <= K)."""
    pair = spec.pair
    x0 = np.asarray(x0, dtype=complex).reshape(-1)
    total = observability_table(pair, 0, N).coeffs @ x0
    for k, u in enumerate(inputs):
        u = np.asarray(u, dtype=complex).reshape(-1)
        if not np.any(u):
            continue
        if k > spec.K:
            raise DomainError(f"input at k = {k} has no stage")
        tab = theta_taylor(pair, spec.stages[k], N).shift(k)
        total = total + tab.coeffs @ u
    return TaylorTable(total[:, :, None])


def ztransform_reconcile(spec: SystemSpec, x0, inputs, N: int, tol: float = 1e-10) -> Report:
    """Simulated outputs y(0..N) against the Taylor coefficients of the frequency-domain formula.

    Residual: max_j |y(j) - yhat_j| / max(1, max_j |yhat_j|).
    """
    trace = simulate(spec, x0, inputs, N)
    yhat = output_series(spec, x0, inputs[: N + 1], N).coeffs[:, :, 0]
    y = np.array(trace.outputs)
    err = np.abs(y - yhat)
    scale = max(1.0, float(np.max(np.abs(yhat))))
    rep = Report()
    worst = int(np.argmax(np.max(err, axis=1))) if err.size else 0
    rep.add("output_series", float(np.max(err, initial=0.0)) / scale, tol, f"worst index {worst}")
    return rep


def energy_audit(spec: SystemSpec, grams: GramianSet, x0, inputs, N: int = 256, tol: float = 1e-8) -> Report:
    """||yhat||^2 = <G_n x0, x0> + sum ||u_k||^2 and mutual orthogonality of the terms."""
    pair, n = spec.pair, spec.n
    x0 = np.asarray(x0, dtype=complex).reshape(-1)
    terms = [observability_table(pair, 0, N).coeffs @ x0]
    energies = [float(np.real(np.vdot(x0, grams.G(n) @ x0)))]
    for k, u in enumerate(inputs):
        u = np.asarray(u, dtype=complex).reshape(-1)
        if k > spec.K:
            raise DomainError(f"input at k = {k} has no stage")
        tab = theta_taylor(pair, spec.stages[k], N).shift(k)
        terms.append(tab.coeffs @ u)
        energies.append(float(np.real(np.vdot(u, u))))
    w = weights(n, N)
    total = sum(terms)
    norm_sq = float(np.sum(w * np.sum(np.abs(total) ** 2, axis=1)))
    expected = sum(energies)
    rep = Report(data={"norm_sq": norm_sq, "expected": expected})
    rep.add("energy_balance", abs(norm_sq - expected) / max(1.0, expected), tol)
    worst = 0.0
    for a in range(len(terms)):
        for b in range(a + 1, len(terms)):
            ip = np.sum(w[:, None] * terms[b].conj() * terms[a])
            na = np.sqrt(np.sum(w[:, None] * np.abs(terms[a]) ** 2))
            nb = np.sqrt(np.sum(w[:, None] * np.abs(terms[b]) ** 2))
            if na > 0 and nb > 0:
                worst = max(worst, float(abs(ip) / (na * nb)))
    rep.add("term_orthogonality", worst, tol)
    return rep


def weighted_system_matrix(pair: OutputPair, stage: StageColligation):
    """[[((k+n)/(k+1)) A, binom(k+n, k+1) B_k], [C, binom(k+n-1, k) D_k]]."""
    n, k = pair.n, stage.k
    return np.block([
        [((k + n) / (k + 1)) * pair.A, comb(k + n, k + 1) * stage.B],
        [pair.C, comb(k + n - 1, k) * stage.D],
    ])


def weighted_isometry_defect(pair: OutputPair, stage: StageColligation, grams: GramianSet):
    """U^* diag(GG_{k+1}, binom(n+k-1, k) I) U - diag(GG_k, I) for U = [[A, B_k], [C, D_k]]."""
    n, k, d = pair.n, stage.k, pair.d
    U = np.block([[pair.A, stage.B], [pair.C, stage.D]])
    Mout = np.zeros((d + pair.p,) * 2, dtype=complex)
    Mout[:d, :d] = grams.GG(k + 1)
    Mout[d:, d:] = comb(n + k - 1, k) * np.eye(pair.p)
    Min = np.zeros((d + stage.u,) * 2, dtype=complex)
    Min[:d, :d] = grams.GG(k)
    Min[d:, d:] = np.eye(stage.u)
    return U.conj().T @ Mout @ U - Min


def weighted_colligation_audit(spec: SystemSpec, grams: GramianSet, tol: float = 1e-9) -> Report:
    """Unitarity of U_k = [[A, B_k], [C, D_k]] between weighted spaces.

    Source metric diag(GG_k, I), target metric diag(GG_{k+1}, binom(n+k-1, k) I).
    Reports the isometry defect U^* M_out U - M_in and the coisometry defect
    U M_in^{-1} U^* - M_out^{-1}, both relative to max(1, ||M||), plus the
    agreement of the weighted system matrix with
    diag(((k+n)/(k+1)) I, I) U diag(I, binom(n+k-1, k) I).
    """
    pair, n = spec.pair, spec.n
    d, p = pair.d, pair.p
    iso = coiso = resc = 0.0
    for st in spec.stages:
        k = st.k
        w = comb(n + k - 1, k)
        U = np.block([[pair.A, st.B], [pair.C, st.D]])
        Min = np.zeros((d + st.u,) * 2, dtype=complex)
        Min[:d, :d] = grams.GG(k)
        Min[d:, d:] = np.eye(st.u)
        Mout = np.zeros((d + p,) * 2, dtype=complex)
        Mout[:d, :d] = grams.GG(k + 1)
        Mout[d:, d:] = w * np.eye(p)
        iso = max(iso, float(np.linalg.norm(U.conj().T @ Mout @ U - Min) / max(1.0, np.linalg.norm(Mout))))
        lhs = U @ inverse(Min) @ U.conj().T
        Mout_inv = inverse(Mout)
        coiso = max(coiso, float(np.linalg.norm(lhs - Mout_inv) / max(1.0, np.linalg.norm(Mout_inv))))
        left = np.diag(np.r_[np.full(d, (k + n) / (k + 1)), np.ones(p)])
        right = np.diag(np.r_[np.ones(d), np.full(st.u, float(w))])
        target = weighted_system_matrix(pair, st)
        resc = max(resc, float(np.linalg.norm(left @ U @ right - target) / max(1.0, np.linalg.norm(target))))
    rep = Report()
    rep.add("weighted_isometry", iso, tol)
    rep.add("weighted_coisometry", coiso, tol)
    rep.add("rescaled_matrix", resc, tol)
    return rep
