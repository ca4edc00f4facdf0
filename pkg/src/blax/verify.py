"""The full invariant suite behind ``blax verify-all``.

Every module contributes named checks to one :class:`Report`.  All random
instances come from a single seeded generator, so the same seed gives the
same residuals.
"""

from __future__ import annotations

import cmath
from fractions import Fraction
from math import comb

import numpy as np

from .bergman import (
    BergmanElement,
    KERNEL_KINDS,
    cauchy_dual_checks,
    default_grid,
    default_grid_points,
    isometry_ladder_residual,
    kernel_eval,
    model_pair,
    smperp_decomposition_check,
)
from .beurlinglax import (
    approach1_build,
    approach2_predicate,
    approach4_build,
    blaschke_taylor,
    build_inner_family,
    collapse_check,
    defect_kernel_identity,
    verify_inner_family,
)
from .corelinalg import psd_factor, spectral_radius
from .onezero import OneZeroOracle, OneZeroSpec, anchor_checks, oracle_vs_pipeline
from .report import Report
from .serieskernels import SeriesSpec, mu, r_coeff, r_eval, verify_series_identities
from .statespace import (
    OutputPair,
    StageColligation,
    gamma_map,
    gramian_series,
    gramians,
    metric_constraint_check,
    random_pair,
    random_squeeze_instance,
    shifted_gramian_closed,
    shifted_gramian_series,
    squeeze_check,
    stein_uniqueness_probe,
)
from .taylor import TaylorTable
from .tvsystem import (
    SystemSpec,
    closed_form_trace,
    energy_audit,
    simulate,
    weighted_colligation_audit,
    weighted_isometry_defect,
    ztransform_reconcile,
)

__all__ = ["verify_all", "CHECKLIST"]

# Invariant -> check-name prefixes that cover it.
CHECKLIST = [
    ("psd factor reconstructs its argument", ["corelinalg.psd_factor_reconstruction"]),
    ("spectral radius is similarity invariant", ["corelinalg.spectral_radius_similarity"]),
    ("n = 1 series are geometric", ["series.n1_geometric"]),
    ("mu_{n,j} binom(j+n-1, j) = 1", ["series.mu_binomial_product"]),
    ("series identities for R_{n,k}", ["series.identities"]),
    ("closed form of R_{n,k} against its power series", ["series.power_series"]),
    ("Gamma_k maps G_n to G_{n-k}", ["statespace.gamma_ladder"]),
    ("weighted Stein identity for shifted gramians", ["statespace.weighted_stein"]),
    ("gramians against truncated series", ["statespace.plain_vs_series", "statespace.shifted_vs_series"]),
    ("G_n is the minimal solution of the Stein inequalities", ["statespace.minimality"]),
    ("gramians transform by congruence under similarity", ["statespace.similarity_congruence"]),
    ("Stein equality uniqueness dichotomy", ["statespace.uniqueness"]),
    ("squeeze lemma", ["statespace.squeeze"]),
    ("stage metric constraints", ["statespace.metric_constraints"]),
    ("n-isometry of the backward shift", ["bergman.isometry_ladder"]),
    ("shifted observability operators and the Cauchy dual", ["bergman.cauchy_dual"]),
    ("model pair observability asymmetry", ["bergman.model_pair_diagonal"]),
    ("model pair shifted gramians dominate I", ["bergman.model_pair_shifted"]),
    ("kernels are Hermitian", ["bergman.kernel_hermitian"]),
    ("complement of S^k M", ["bergman.smperp"]),
    ("inner family: orthogonality, isometry, kernel identities", ["beurlinglax.inner_family"]),
    ("multiplier kernel sum reproduces k_M", ["beurlinglax.approach1"]),
    ("contractive multiplier predicate", ["beurlinglax.approach2"]),
    ("wandering subspace representer", ["beurlinglax.approach4"]),
    ("stage defect kernel identity", ["beurlinglax.defect_kernel"]),
    ("n = 1 collapse", ["beurlinglax.collapse"]),
    ("simulator against closed-form sums", ["tvsystem.closed_form"]),
    ("superposition", ["tvsystem.superposition"]),
    ("n = 1 classical recursion", ["tvsystem.classical"]),
    ("pulse responses against Taylor coefficients", ["tvsystem.ztransform"]),
    ("energy balance", ["tvsystem.energy"]),
    ("weighted unitarity of the colligations", ["tvsystem.colligation"]),
    ("zeroed D leaves an isometry defect binom D^* D", ["tvsystem.zeroed_d_defect"]),
    ("one-zero oracle against the pipeline", ["onezero.pipeline"]),
    ("one-zero anchors", ["onezero.anchor"]),
    ("two gramian formulas of the oracle agree", ["onezero.gramian_forms"]),
]


def _rel(diff, *refs):
    scale = max([1.0] + [float(np.linalg.norm(r)) for r in refs])
    return float(np.linalg.norm(diff)) / scale


def _corelinalg(rep, rng):
    worst = 0.0
    for _ in range(200):
        d = int(rng.integers(1, 7))
        r = int(rng.integers(1, d + 1))
        X = rng.standard_normal((d, r)) + 1j * rng.standard_normal((d, r))
        M = X @ X.conj().T
        V = psd_factor(M)
        worst = max(worst, _rel(V @ V.conj().T - M, M))
    rep.add("corelinalg.psd_factor_reconstruction", worst, 1e-10)
    worst = 0.0
    for _ in range(50):
        d = int(rng.integers(1, 6))
        M = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        T = np.eye(d) + 0.3 * (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)))
        r1, r2 = spectral_radius(M), spectral_radius(T @ M @ np.linalg.inv(T))
        worst = max(worst, abs(r1 - r2) / max(1.0, r1))
    rep.add("corelinalg.spectral_radius_similarity", worst, 1e-8)


def _series(rep):
    pts = default_grid_points()
    worst = 0.0
    for k in range(11):
        s = SeriesSpec(1, k)
        worst = max(worst, max(abs(r_coeff(s, j) - 1) for j in range(41)))
        worst = max(worst, max(abs(r_eval(s, z) - 1 / (1 - z)) / abs(1 / (1 - z)) for z in pts))
    rep.add("series.n1_geometric", worst, 1e-12)
    bad = sum(1 for n in range(1, 7) for j in range(41) if mu(n, j) * comb(j + n - 1, j) != Fraction(1))
    rep.add("series.mu_binomial_product", bad, 0)
    for n in range(1, 7):
        rep.extend(verify_series_identities(n, 10, 40, pts), prefix=f"series.identities.n{n}.")
    worst = 0.0
    for n in range(1, 7):
        for k in (0, 1, 4, 10):
            s = SeriesSpec(n, k)
            for z in pts:
                j = np.arange(900)
                terms = np.array([float(r_coeff(s, int(i))) for i in j]) * z**j
                ref = terms.sum()
                worst = max(worst, abs(r_eval(s, z) - ref) / max(1.0, float(np.abs(terms).sum())))
    rep.add("series.power_series", worst, 1e-10)


def _statespace(rep, rng, pairs):
    ladder = stein = plain = shifted = sim = mini = 0.0
    for pair in pairs:
        g = gramians(pair, k_max=7)
        A, C, n = pair.A, pair.C, pair.n
        for k in range(n + 1):
            ladder = max(ladder, _rel(gamma_map(A, g.G(n), k) - g.G(n - k), g.G(n - k)))
        CC = C.conj().T @ C
        for k in range(7):
            lhs = A.conj().T @ g.GG(k + 1) @ A + comb(n + k - 1, k) * CC
            stein = max(stein, _rel(lhs - g.GG(k), g.GG(k)))
            closed = shifted_gramian_closed(A, g.G(n), n, k)
            ser = shifted_gramian_series(pair, k)
            shifted = max(shifted, _rel(closed - ser, ser))
        for m in range(1, n + 1):
            ser = gramian_series(pair, m)
            plain = max(plain, _rel(g.G(m) - ser, ser))
        E = rng.standard_normal((2, pair.d)) + 1j * rng.standard_normal((2, pair.d))
        H = g.G(n) + rng.uniform(0.1, 2.0) * gramians(OutputPair(A, E, n), k_max=0, crosscheck=False).G(n)
        lam = float(np.linalg.eigvalsh(H - g.G(n))[0])
        mini = max(mini, max(0.0, -lam) / np.linalg.norm(H, 2))
        T = np.eye(pair.d) + 0.3 * (rng.standard_normal((pair.d,) * 2) + 1j * rng.standard_normal((pair.d,) * 2))
        Ti = np.linalg.inv(T)
        g2 = gramians(OutputPair(T @ A @ Ti, C @ Ti, n), k_max=0, crosscheck=False)
        target = Ti.conj().T @ g.G(n) @ Ti
        sim = max(sim, _rel(g2.G(n) - target, target))
    rep.add("statespace.gamma_ladder", ladder, 1e-9)
    rep.add("statespace.weighted_stein", stein, 1e-9)
    rep.add("statespace.plain_vs_series", plain, 1e-8)
    rep.add("statespace.shifted_vs_series", shifted, 1e-8)
    rep.add("statespace.minimality", mini, 1e-9)
    rep.add("statespace.similarity_congruence", sim, 1e-8)

    half = stein_uniqueness_probe(OutputPair([[0.5]], [[1.0]], 1))
    rep.add("statespace.uniqueness.contraction_unique", float(not half.unique) + half.residual_G, 1e-10)
    rep.add("statespace.uniqueness.contraction_gramian", abs(half.G[0, 0] - 4 / 3), 1e-10)
    for label, A, C in (("identity", [[1.0]], [[0.0]]), ("mixed", np.diag([1.0, 0.5]), [[0.0, 1.0]])):
        r = stein_uniqueness_probe(OutputPair(A, C, 1))
        rep.add(f"statespace.uniqueness.{label}_nonunique", float(r.unique), 0)
        rep.add(f"statespace.uniqueness.{label}_second_solution", r.residual_second, 1e-10)

    worst = 0.0
    for _ in range(500):
        n = int(rng.integers(3, 6))
        A, H = random_squeeze_instance(rng, n)
        r = squeeze_check(A, H, n)
        worst = max(worst, max(0.0, -min(r.min_eigenvalues) / r.scale))
    rep.add("statespace.squeeze", worst, 1e-9)


def _bergman(rep, rng, pairs):
    worst = 0.0
    for n in (1, 2, 3, 4):
        for _ in range(5):
            c = rng.standard_normal((60, 2)) + 1j * rng.standard_normal((60, 2))
            c[40:] = 0
            worst = max(worst, isometry_ladder_residual(BergmanElement(n, c)))
    rep.add("bergman.isometry_ladder", worst, 1e-10)
    for n in (1, 2, 3):
        rep.extend(cauchy_dual_checks(n, 4, 60, pairs=[p.with_n(n) for p in pairs[:2]]), prefix=f"bergman.cauchy_dual.n{n}.")
    for n in (2, 3, 4):
        N = 120
        mp = model_pair(n, N + 1)
        entry = gramian_series(mp, n - 1, terms=N + 2)[N, N].real
        rep.add(f"bergman.model_pair_diagonal.n{n}", max(0.0, entry - 2 * (n - 1) / N), 0)
    for n in (2, 3):
        mp = model_pair(n, 40)
        low = min(float(np.linalg.eigvalsh(shifted_gramian_series(mp, k, terms=41))[0]) for k in range(1, 4))
        rep.add(f"bergman.model_pair_shifted.n{n}", max(0.0, 1 - 1e-9 - low), 0)
    grid = default_grid()
    worst = 0.0
    for pair in pairs[:3]:
        g = gramians(pair, k_max=3)
        for kind in KERNEL_KINDS:
            kg = kernel_eval(kind, pair, g, grid, H=g.G(pair.n), k=1)
            worst = max(worst, kg.hermitian_defect())
    rep.add("bergman.kernel_hermitian", worst, 1e-10)
    for i, pair in enumerate(pairs[:2]):
        for k in (0, 1, 2):
            rep.extend(smperp_decomposition_check(pair, k, 48), prefix=f"bergman.smperp.pair{i}.k{k}.")


def _beurlinglax(rep, rng, pairs):
    grid = default_grid()
    for i, pair in enumerate(pairs[:3]):
        fam = build_inner_family(pair, 6)
        rep.extend(verify_inner_family(fam, grid), prefix=f"beurlinglax.inner_family.pair{i}.")
        rep.extend(approach1_build(pair, grid, grams=fam.grams).report, prefix=f"beurlinglax.approach1.pair{i}.")
        rep.extend(approach4_build(pair, grid, grams=fam.grams, family=fam).report, prefix=f"beurlinglax.approach4.pair{i}.")
        st = fam.stages[2]
        bent = StageColligation(2, 0.5 * st.B, 0.3 * st.D + 0.1)
        sub = [(z, w) for z, w in grid[::7]]
        rep.add(f"beurlinglax.defect_kernel.pair{i}.stage", defect_kernel_identity(pair, st, fam.grams, sub), 1e-10)
        rep.add(f"beurlinglax.defect_kernel.pair{i}.perturbed", defect_kernel_identity(pair, bent, fam.grams, sub), 1e-10)
        metric = Report()
        for s in fam.stages:
            metric.extend(metric_constraint_check(pair, s, fam.grams), prefix=f"k{s.k}.")
        rep.add(f"statespace.metric_constraints.pair{i}", metric.max_residual(), 1e-9)

    alpha = 0.5
    rep.extend(approach2_predicate(blaschke_taylor(alpha, 80), 2, alpha=alpha), prefix="beurlinglax.approach2.blaschke.")
    ident = approach2_predicate(_const(1.0, 40), 2)
    rep.extend(ident, prefix="beurlinglax.approach2.identity.")
    rep.add("beurlinglax.approach2.double_fails", float(approach2_predicate(_const(2.0, 40), 2).passed), 0)

    for a in (0.5, 0.3, 0.7j):
        pair = OutputPair([[np.conj(a)]], [[np.sqrt(1 - abs(a) ** 2)]], 1)
        fam = build_inner_family(pair, 5, N=64)
        rep.add(f"beurlinglax.collapse.onezero_{_tag(a)}", collapse_check(fam, grid), 1e-9)
        mf = approach1_build(pair, grid, N=64, grams=fam.grams)
        diff = max(abs(mf.evaluate(1, z) - mf.psi_eval(1, z)).max() for z in default_grid_points())
        rep.add(f"beurlinglax.collapse.single_multiplier_{_tag(a)}", float(diff) + abs(len(mf.entries) - 1), 1e-12)
    for i, pair in enumerate(pairs[3:5]):
        pair = pair.with_n(1)
        fam = build_inner_family(pair, 5, N=64)
        rep.add(f"beurlinglax.collapse.random{i}", collapse_check(fam, grid), 1e-9)


def _const(c, N):
    return TaylorTable.constant([[c]], N)


def _tag(a):
    a = complex(a)
    return f"{a.real:g}{a.imag:+g}i".replace(".", "p").replace("+", "p").replace("-", "m")


def _tvsystem(rep, rng, pairs):
    closed = sup = 0.0
    fams = {}
    for i in range(100):
        pair = pairs[i % len(pairs)]
        if i % len(pairs) not in fams:
            fams[i % len(pairs)] = build_inner_family(pair, 30, N=32)
        spec = SystemSpec.from_family(fams[i % len(pairs)])
        T = int(rng.integers(1, 31))
        x0 = rng.standard_normal(pair.d) + 1j * rng.standard_normal(pair.d)
        us = [rng.standard_normal(st.u) + 1j * rng.standard_normal(st.u) for st in spec.stages]
        vs = [rng.standard_normal(st.u) + 1j * rng.standard_normal(st.u) for st in spec.stages]
        a, b = simulate(spec, x0, us, T), closed_form_trace(spec, x0, us, T)
        ya, yb = np.array(a.outputs), np.array(b.outputs)
        closed = max(closed, float(np.max(np.abs(ya - yb)) / max(1.0, np.max(np.abs(yb)))))
        xa, xb = np.array(a.states), np.array(b.states)
        closed = max(closed, float(np.max(np.abs(xa - xb)) / max(1.0, np.max(np.abs(xb)))))
        if i < 20:
            uv = [u + v for u, v in zip(us, vs)]
            s1 = np.array(simulate(spec, x0, uv, T).outputs)
            s2 = np.array(simulate(spec, x0, us, T).outputs) + np.array(simulate(spec, 0 * x0, vs, T).outputs)
            sup = max(sup, float(np.max(np.abs(s1 - s2)) / max(1.0, np.max(np.abs(s2)))))
    rep.add("tvsystem.closed_form", closed, 1e-10)
    rep.add("tvsystem.superposition", sup, 1e-10)

    # n = 1 with constant stages is the classical recursion x' = Ax + Bu, y = Cx + Du.
    pair = pairs[0].with_n(1)
    fam = build_inner_family(pair, 20, N=32)
    st0 = fam.stages[0]
    spec = SystemSpec(pair, tuple(StageColligation(k, st0.B, st0.D) for k in range(21)))
    x0 = rng.standard_normal(pair.d) + 0j
    us = [rng.standard_normal(st0.u) + 0j for _ in range(21)]
    tr = simulate(spec, x0, us, 20)
    x, worst = x0, 0.0
    for j in range(21):
        y = pair.C @ x + st0.D @ us[j]
        worst = max(worst, float(np.max(np.abs(y - tr.outputs[j]))))
        x = pair.A @ x + st0.B @ us[j]
    rep.add("tvsystem.classical", worst, 0)

    for i, pair in enumerate(pairs[:3]):
        fam = build_inner_family(pair, 49, N=256)
        spec = SystemSpec.from_family(fam)
        pulse = 0.0
        for k in (0, 1, 7, 49):
            st = spec.stages[k]
            for e in range(st.u):
                us = [np.zeros(s.u, dtype=complex) for s in spec.stages]
                us[k][e] = 1.0
                y = np.array(simulate(spec, np.zeros(pair.d), us, 49).outputs)
                ref = fam.thetas[k].coeffs[: 50 - k, :, e]
                got = y[k:]
                pulse = max(pulse, float(np.max(np.abs(got - ref)) / max(1.0, np.max(np.abs(ref)))))
        rep.add(f"tvsystem.ztransform.pair{i}.pulse", pulse, 1e-10)
        x0 = rng.standard_normal(pair.d) + 1j * rng.standard_normal(pair.d)
        us = [rng.standard_normal(s.u) + 1j * rng.standard_normal(s.u) for s in spec.stages]
        rep.extend(ztransform_reconcile(spec, x0, us, 49), prefix=f"tvsystem.ztransform.pair{i}.")
        rep.extend(energy_audit(spec, fam.grams, x0, us[:8]), prefix=f"tvsystem.energy.pair{i}.")
        rep.extend(weighted_colligation_audit(spec, fam.grams), prefix=f"tvsystem.colligation.pair{i}.")
        st = spec.stages[3]
        zeroed = StageColligation(3, st.B, 0 * st.D)
        defect = weighted_isometry_defect(pair, zeroed, fam.grams)
        expected = -comb(pair.n + 2, 3) * st.D.conj().T @ st.D
        block = defect[pair.d:, pair.d:]
        rep.add(f"tvsystem.zeroed_d_defect.pair{i}", _rel(block - expected, expected), 1e-9)


def _onezero(rep, rng):
    for n in (1, 2, 3):
        for a in (0.5, 0.3, 0.7j):
            rep.extend(oracle_vs_pipeline(OneZeroSpec(a, n)), prefix=f"onezero.pipeline.n{n}.{_tag(a)}.")
    rep.extend(anchor_checks(), prefix="onezero.")
    worst = 0.0
    for _ in range(20):
        r = rng.uniform(0.05, 0.95)
        a = r * cmath.exp(2j * np.pi * rng.uniform())
        for n in range(1, 6):
            o = OneZeroOracle(OneZeroSpec(a, n))
            for k in range(13):
                worst = max(worst, abs(o.GG(k) - o.GG_exact(k)) / max(1.0, abs(o.GG_exact(k))))
    rep.add("onezero.gramian_forms", worst, 1e-10)


def verify_all(seed: int = 0) -> Report:
    """Run every module's invariant checks with instances drawn from ``seed``."""
    rng = np.random.default_rng(seed)
    pairs = [random_pair(rng, d_max=3, p_max=2) for _ in range(6)]
    rep = Report(data={"seed": seed})
    _corelinalg(rep, rng)
    _series(rep)
    _statespace(rep, rng, pairs)
    _bergman(rep, rng, pairs)
    _beurlinglax(rep, rng, pairs)
    _tvsystem(rep, rng, pairs)
    _onezero(rep, rng)
    rep.checks.sort(key=lambda c: c.name)
    names = [c.name for c in rep.checks]
    rep.data["checklist"] = [
        {"invariant": text, "checks": [nm for nm in names if any(nm.startswith(p) for p in prefixes)]}
        for text, prefixes in CHECKLIST
    ]
    return rep
