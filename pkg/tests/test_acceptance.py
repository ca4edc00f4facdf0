"""Acceptance criteria, one test each; the terminal summary lists PASS/FAIL per criterion."""

import time

import numpy as np
import pytest

from blax.bergman import default_grid, default_grid_points
from blax.beurlinglax import build_inner_family, collapse_check, theta_stage, verify_inner_family
from blax.onezero import OneZeroSpec, anchor_checks, oracle_pair, oracle_vs_pipeline
from blax.serieskernels import verify_series_identities
from blax.statespace import (
    OutputPair,
    gramian_series,
    gramians,
    random_pair,
    random_squeeze_instance,
    shifted_gramian_closed,
    shifted_gramian_series,
    squeeze_check,
    stein_uniqueness_probe,
)
from blax.tvsystem import SystemSpec, energy_audit, simulate, weighted_colligation_audit
from blax.verify import verify_all


@pytest.fixture(scope="module")
def acceptance_pairs():
    rng = np.random.default_rng(2024)
    return [random_pair(rng, d_max=4, p_max=3, n_max=4) for _ in range(50)]


def _line(record_property, text):
    record_property("detail", text)
    print(text)


def test_criterion_1_series_identities(record_property):
    t0 = time.perf_counter()
    worst, chu = 0.0, 0
    for n in range(1, 7):
        rep = verify_series_identities(n, 10, 40, default_grid_points())
        chu += int(rep["chu_vandermonde"].residual)
        worst = max(worst, max(c.residual for c in rep.checks if c.name != "chu_vandermonde"))
    dt = time.perf_counter() - t0
    _line(record_property, f"integer failures {chu}, worst residual {worst:.2e} (tol 1e-10), {dt:.2f}s (limit 1s)")
    assert chu == 0
    assert worst <= 1e-10
    assert dt < 1.0


def test_criterion_2_gramian_consistency(acceptance_pairs, record_property):
    t0 = time.perf_counter()
    worst = 0.0
    for pair in acceptance_pairs:
        g = gramians(pair, k_max=6, crosscheck=False)
        for m in range(pair.n + 1):
            ser = gramian_series(pair, m, terms=200)
            worst = max(worst, np.linalg.norm(g.G(m) - ser) / np.linalg.norm(ser))
        for k in range(1, 7):
            closed = shifted_gramian_closed(pair.A, g.G(pair.n), pair.n, k)
            ser = shifted_gramian_series(pair, k, terms=200)
            worst = max(worst, np.linalg.norm(closed - ser) / np.linalg.norm(ser))
    dt = time.perf_counter() - t0
    _line(record_property, f"worst relative error {worst:.2e} (tol 1e-8), {dt:.2f}s (limit 10s)")
    assert worst <= 1e-8
    assert dt < 10.0


def test_criterion_3_onezero_oracle(record_property):
    t0 = time.perf_counter()
    failures = []
    worst = 0.0
    for alpha in (0.5, 0.3, 0.7j):
        for n in (1, 2, 3):
            rep = oracle_vs_pipeline(OneZeroSpec(alpha, n), K=6, grid=default_grid())
            worst = max(worst, rep.max_residual())
            failures += [f"{alpha},{n}:{c.name}" for c in rep.failures]
    anchors = anchor_checks()
    failures += [c.name for c in anchors.failures]
    dt = time.perf_counter() - t0
    _line(record_property, f"worst oracle residual {worst:.2e}, anchors max {anchors.max_residual():.2e} "
          f"(tol 5e-7), {dt:.2f}s (limit 5s)")
    assert not failures, failures
    assert dt < 5.0


def test_criterion_4_inner_family(acceptance_pairs, record_property):
    t0 = time.perf_counter()
    worst = 0.0
    failures = []
    grid = default_grid()
    for i, pair in enumerate(acceptance_pairs):
        fam = build_inner_family(pair, 6, N=256)
        rep = verify_inner_family(fam, grid, N=256, tol=1e-8)
        worst = max(worst, rep.max_residual())
        failures += [f"pair {i}: {c.name}" for c in rep.failures]
    dt = time.perf_counter() - t0
    _line(record_property, f"worst residual {worst:.2e} (tol 1e-8), {dt:.2f}s (limit 30s)")
    assert not failures, failures
    assert dt < 30.0


def test_criterion_5_simulator(record_property):
    rng = np.random.default_rng(55)
    K = 60
    pulse = energy = unitary = 0.0
    for _ in range(4):
        pair = random_pair(rng, d_max=3, p_max=2)
        fam = build_inner_family(pair, K, N=256)
        spec = SystemSpec.from_family(fam)
        zero_in = [np.zeros(st.u, dtype=complex) for st in spec.stages]
        for k in (0, 4, 11):
            for col in range(spec.stages[k].u):
                us = [u.copy() for u in zero_in]
                us[k][col] = 1.0
                y = simulate(spec, np.zeros(pair.d), us, k + 49).outputs
                coeffs = fam.thetas[k].coeffs[:50, :, col]
                got = np.array(y[k:k + 50])
                pulse = max(pulse, np.max(np.abs(got - coeffs)) / max(1.0, np.max(np.abs(coeffs))))
        x0 = rng.standard_normal(pair.d) + 1j * rng.standard_normal(pair.d)
        us = [rng.standard_normal(st.u) + 1j * rng.standard_normal(st.u) for st in spec.stages]
        energy = max(energy, energy_audit(spec, fam.grams, x0, us, N=256).max_residual())
        unitary = max(unitary, weighted_colligation_audit(spec, fam.grams).max_residual())
    _line(record_property, f"pulses {pulse:.2e} (tol 1e-10), energy {energy:.2e} (tol 1e-8), "
          f"unitarity {unitary:.2e} (tol 1e-9)")
    assert pulse <= 1e-10
    assert energy <= 1e-8
    assert unitary <= 1e-9


def test_criterion_6a_classical_collapse(record_property):
    rng = np.random.default_rng(66)
    worst = 0.0
    for _ in range(10):
        pair = random_pair(rng, n=1)
        worst = max(worst, collapse_check(build_inner_family(pair, 8, N=64), default_grid()))
    _line(record_property, f"max |Theta_k Theta_k* - Theta_0 Theta_0*| {worst:.2e} (tol 1e-9)")
    assert worst <= 1e-9


def test_criterion_6b_boundary_modulus(record_property):
    # Each stage is computed by the pipeline; 1 - |Theta(z)| is taken at |z| = 0.999.
    worst = 0.0
    zs = [0.999 * np.exp(2j * np.pi * m / 8) for m in range(8)]
    for alpha in (0.5, 0.3, 0.7j):
        pair = oracle_pair(OneZeroSpec(alpha, 1))
        fam = build_inner_family(pair, 6, N=8)
        for st in fam.stages:
            worst = max(worst, max(1 - abs(theta_stage(pair, st, z)[0, 0]) for z in zs))
    _line(record_property, f"max 1 - |Theta(z)| at |z| = 0.999: {worst:.3e} (tol 1e-3)")
    assert worst <= 1e-3


def test_criterion_7_stein_uniqueness(record_property):
    r = stein_uniqueness_probe(OutputPair([[0.5]], [[1.0]], 1))
    g = gramians(OutputPair([[0.5]], [[1.0]], 1), k_max=0).G(1)
    unique_ok = r.unique and abs(r.G[0, 0] - g[0, 0]) <= 1e-12 and abs(g[0, 0] - 4 / 3) <= 1e-14
    second = []
    for A, C in (([[1.0]], [[0.0]]), (np.diag([1.0, 0.5]), [[0.0, 1.0]])):
        r = stein_uniqueness_probe(OutputPair(A, C, 1))
        A = np.asarray(A, dtype=float)
        # independent residual of the exhibited second solution
        H2 = r.G + r.delta
        CC = np.asarray(C).T @ np.asarray(C)
        res = float(np.linalg.norm(H2 - A.T @ H2 @ A - CC))
        second.append((r.unique, round(float(np.linalg.norm(r.delta)), 12), float(f"{res:.2e}")))
    _line(record_property, f"unique case ok: {unique_ok}; second solutions (unique, |delta|, residual): {second}")
    assert unique_ok
    for unique, dnorm, res in second:
        assert not unique and dnorm > 0.5 and res <= 1e-10


def test_criterion_8_squeeze(record_property):
    rng = np.random.default_rng(88)
    worst = 0.0
    counterexamples = 0
    for _ in range(500):
        n = int(rng.integers(3, 6))
        A, H = random_squeeze_instance(rng, n)
        r = squeeze_check(A, H, n)
        scale = np.linalg.norm(H, 2)
        worst = min(worst, min(r.min_eigenvalues) / scale)
        counterexamples += int(min(r.min_eigenvalues) < -1e-9 * scale)
    _line(record_property, f"500 instances, counterexamples {counterexamples}, "
          f"worst min eigenvalue / ||H|| {worst:.2e} (bound -1e-9)")
    assert counterexamples == 0


def test_verify_all_runtime(record_property):
    t0 = time.perf_counter()
    rep = verify_all(seed=0)
    dt = time.perf_counter() - t0
    _line(record_property, f"{len(rep.checks)} checks, failures {len(rep.failures)}, {dt:.1f}s (limit 60s)")
    assert rep.passed
    assert dt < 60.0
