"""Closed-form oracle for the scalar one-zero subspace M = {f : f(alpha) = 0}.

The pair is A = conj(alpha), C = (1 - t)^{n/2}, t = |alpha|^2, for which
every object in the pipeline has an explicit formula.  The formulas here are
written out independently of the generic state-space code so that the two
routes can be compared.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from math import comb

import numpy as np

from .bergman import default_grid, kernel_eval
from .beurlinglax import approach1_build, approach4_build, build_inner_family, theta_stage
from .errors import DomainError
from .report import Report
from .statespace import OutputPair, gramians

__all__ = [
    "OneZeroSpec",
    "OneZeroOracle",
    "oracle_all",
    "oracle_pair",
    "oracle_vs_pipeline",
    "anchor_checks",
    "ANCHORS",
    "theta_boundary_defect",
]

# n = 2, alpha = 0.5, rounded to six decimals.
ANCHORS = {
    "G_2": 1.0,
    "G_1": 0.75,
    "GG_1": 1.75,
    "D_0": 0.661438,
    "B_0": -0.566947,
    "theta_0_coeff_1": -0.850420,
    "F_1_at_0": -0.433013,
    "F_2_at_0": -0.5,
    "kM_at_0": 0.4375,
}


@dataclass(frozen=True)
class OneZeroSpec:
    alpha: complex
    n: int

    def __post_init__(self):
        a = complex(self.alpha)
        if not (1e-6 < abs(a) < 1 - 1e-6):
            raise DomainError(f"|alpha| must lie in (1e-6, 1 - 1e-6), got {abs(a)}")
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"n must be a positive integer, got {self.n}")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "n", int(self.n))

    @property
    def t(self) -> float:
        return abs(self.alpha) ** 2


def oracle_pair(spec: OneZeroSpec) -> OutputPair:
    a, n = spec.alpha, spec.n
    return OutputPair(np.array([[a.conjugate()]]), np.array([[(1 - spec.t) ** (n / 2)]]), n)


def _rnk(n, k, x):
    """R_{n,k}(x) = sum_{i<n} binom(k+n-1, k+i) x^i (1-x)^{-(i+1)}."""
    return sum(comb(k + n - 1, k + i) * x**i / (1 - x) ** (i + 1) for i in range(n))


class OneZeroOracle:
    """Explicit formulas for gramians, stages, Theta_k, F_l and k_M."""

    def __init__(self, spec: OneZeroSpec):
        self.spec = spec
        self.n, self.alpha, self.t = spec.n, spec.alpha, spec.t

    def G(self, j: int) -> float:
        return (1 - self.t) ** (self.n - j)

    def GG(self, k: int) -> float:
        """(1-t)^n R_{n,k}(t)."""
        n, t = self.n, self.t
        return (1 - t) ** n * _rnk(n, k, t)

    def GG_exact(self, k: int) -> float:
        """t^{-k} (1 - (1-t)^n sum_{j<k} binom(n+j-1, j) t^j) in exact rationals of the float t."""
        n, t = self.n, Fraction(self.t)
        s = sum((comb(n + j - 1, j) * t**j for j in range(k)), Fraction(0))
        return float((1 - (1 - t) ** n * s) / t**k)

    def _mu(self, k):
        return 1.0 / comb(k + self.n - 1, k)

    def B(self, k: int) -> complex:
        a = self.alpha
        C = (1 - self.t) ** (self.n / 2)
        return -(a.conjugate() / abs(a)) * C / math.sqrt(self._mu(k) * self.GG(k) * self.GG(k + 1))

    def D(self, k: int) -> float:
        return abs(self.alpha) * math.sqrt(self._mu(k) * self.GG(k + 1) / self.GG(k))

    def theta(self, k: int, z) -> complex:
        n, t, a = self.n, self.t, self.alpha
        if k == 0:
            return (1 - ((1 - t) / (1 - z * a.conjugate())) ** n) / (abs(a) * math.sqrt(self.GG(1)))
        scale = (1 - t) ** n / (abs(a) * math.sqrt(self._mu(k) * self.GG(k) * self.GG(k + 1)))
        return scale * (_rnk(n, k, t) - _rnk(n, k, z * a.conjugate()))

    def blaschke(self, z) -> complex:
        a = self.alpha
        return (z - a) / (1 - z * a.conjugate())

    def F(self, ell: int, z) -> complex:
        a, t = self.alpha, self.t
        return self.blaschke(z) * (math.sqrt(1 - t) / (1 - z * a.conjugate())) ** (self.n - ell)

    def kM(self, z, zeta) -> complex:
        a, t, n = self.alpha, self.t, self.n
        w = z * zeta.conjugate()
        return (1 - w) ** (-n) - (1 - t) ** n / ((1 - z * a.conjugate()) ** n * (1 - a * zeta.conjugate()) ** n)


def oracle_all(spec: OneZeroSpec, K: int = 6, grid=None) -> dict:
    """Oracle values on the grid: gramians, stage moduli, Theta/F/k_M products."""
    o = OneZeroOracle(spec)
    grid = grid if grid is not None else default_grid()
    n = spec.n
    return {
        "G": [o.G(j) for j in range(n + 1)],
        "GG": [o.GG(k) for k in range(K + 2)],
        "GG_exact": [o.GG_exact(k) for k in range(K + 2)],
        "B": [o.B(k) for k in range(K + 1)],
        "D": [o.D(k) for k in range(K + 1)],
        "theta_products": [[o.theta(k, z) * o.theta(k, w).conjugate() for z, w in grid] for k in range(K + 1)],
        "F_products": [[o.F(ell, z) * o.F(ell, w).conjugate() for z, w in grid] for ell in range(1, n + 1)],
        "kM": [o.kM(complex(z), complex(w)) for z, w in grid],
    }


def _rel(a, b):
    return abs(a - b) / max(1.0, abs(b))


def oracle_vs_pipeline(spec: OneZeroSpec, K: int = 6, grid=None, N: int = 256,
                       tol_gram: float = 1e-12, tol: float = 1e-10) -> Report:
    """Compare the generic pipeline with the explicit formulas."""
    grid = grid if grid is not None else default_grid()
    o = OneZeroOracle(spec)
    pair = oracle_pair(spec)
    n = spec.n
    grams = gramians(pair, k_max=K + 1)
    rep = Report(data={"alpha": [spec.alpha.real, spec.alpha.imag], "n": n, "K": K})

    rep.add("gramian_plain", max(_rel(grams.G(j)[0, 0], o.G(j)) for j in range(n + 1)), tol_gram)
    rep.add("gramian_shifted", max(_rel(grams.GG(k)[0, 0], o.GG(k)) for k in range(1, K + 2)), tol_gram)
    rep.add("gramian_shifted_exact_form",
            max(_rel(o.GG_exact(k), o.GG(k)) for k in range(K + 2)), tol_gram)

    fam = build_inner_family(pair, K, N=N, grams=grams)
    rep.add("stage_B_modulus", max(_rel(abs(st.B[0, 0]), abs(o.B(st.k))) for st in fam.stages), tol)
    rep.add("stage_D_modulus", max(_rel(abs(st.D[0, 0]), abs(o.D(st.k))) for st in fam.stages), tol)
    pts = sorted({complex(z) for z, _ in grid} | {complex(w) for _, w in grid}, key=lambda c: (c.real, c.imag))
    worst = 0.0
    for st in fam.stages:
        th = {z: theta_stage(pair, st, z)[0, 0] for z in pts}
        for z, w in grid:
            got = th[complex(z)] * th[complex(w)].conjugate()
            ref = o.theta(st.k, complex(z)) * o.theta(st.k, complex(w)).conjugate()
            worst = max(worst, _rel(got, ref))
    rep.add("theta_products", worst, tol)
    rep.add("theta_vanishes_at_alpha",
            max(abs(theta_stage(pair, st, spec.alpha)[0, 0]) for st in fam.stages), tol)

    mf = approach1_build(pair, grid=grid, N=N, grams=grams)
    worst = 0.0
    for ell in range(1, n + 1):
        fv = {z: mf.evaluate(ell, z)[0, 0] for z in pts}
        for z, w in grid:
            got = fv[complex(z)] * fv[complex(w)].conjugate()
            ref = o.F(ell, complex(z)) * o.F(ell, complex(w)).conjugate()
            worst = max(worst, _rel(got, ref))
    rep.add("F_products", worst, tol)

    a4 = approach4_build(pair, grid=grid, N=N, grams=grams)
    worst = 0.0
    for z, w in grid:
        got = a4(z)[0, 0] * a4(w)[0, 0].conjugate()
        ref = o.theta(0, complex(z)) * o.theta(0, complex(w)).conjugate()
        worst = max(worst, _rel(got, ref))
    rep.add("approach4_products", worst, tol)

    kM = kernel_eval("kM", pair, grams, grid)
    rep.add("kM", max(_rel(kM.values[i][0, 0], o.kM(complex(z), complex(w))) for i, (z, w) in enumerate(grid)), tol)

    # F_l F_l^* summed against (1 - z conj w)^{-l} reproduces k_M.
    worst = 0.0
    for z, w in grid:
        z, w = complex(z), complex(w)
        s = sum(o.F(ell, z) * o.F(ell, w).conjugate() / (1 - z * w.conjugate()) ** ell for ell in range(1, n + 1))
        worst = max(worst, _rel(s, o.kM(z, w)))
    rep.add("oracle_kernel_sum", worst, 1e-12)
    return rep


def anchor_checks(tol: float = 5e-7) -> Report:
    """Rounded reference values for n = 2, alpha = 0.5, recomputed through the pipeline."""
    spec = OneZeroSpec(0.5, 2)
    pair = oracle_pair(spec)
    grams = gramians(pair, k_max=2)
    fam = build_inner_family(pair, 0, N=8, grams=grams)
    st = fam.stages[0]
    phase = st.D[0, 0] / abs(st.D[0, 0])  # fix the free unimodular factor so that D_0 > 0
    mf = approach1_build(pair, grid=[(0j, 0j)], N=8, grams=grams)
    got = {
        "G_2": grams.G(2)[0, 0].real,
        "G_1": grams.G(1)[0, 0].real,
        "GG_1": grams.GG(1)[0, 0].real,
        "D_0": (st.D[0, 0] / phase).real,
        "B_0": (st.B[0, 0] / phase).real,
        "theta_0_coeff_1": (fam.thetas[0].coeffs[1, 0, 0] / phase).real,
        "F_1_at_0": mf.evaluate(1, 0j)[0, 0].real,
        "F_2_at_0": mf.evaluate(2, 0j)[0, 0].real,
        "kM_at_0": kernel_eval("kM", pair, grams, [(0j, 0j)]).values[0][0, 0].real,
    }
    rep = Report()
    for name, ref in ANCHORS.items():
        rep.add(f"anchor_{name}", abs(got[name] - ref), tol)
    return rep


def theta_boundary_defect(spec: OneZeroSpec, k: int, radius: float = 0.999, phases: int = 4, K: int | None = None):
    """max 1 - |Theta_{n,k}(z)| over |z| = radius at ``phases`` equally spaced angles (pipeline route)."""
    pair = oracle_pair(spec)
    fam = build_inner_family(pair, k if K is None else K, N=8)
    st = fam.stages[k]
    zs = [radius * cmath.exp(2j * cmath.pi * m / phases) for m in range(phases)]
    return max(1.0 - abs(theta_stage(pair, st, z)[0, 0]) for z in zs)
