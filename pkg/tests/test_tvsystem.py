from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blax.beurlinglax import build_inner_family
from blax.errors import DimensionError, DomainError
from blax.statespace import OutputPair, StageColligation, gramians, random_pair
from blax.tvsystem import (
    SystemSpec,
    closed_form_trace,
    energy_audit,
    simulate,
    weighted_colligation_audit,
    weighted_isometry_defect,
    ztransform_reconcile,
)

seeds = st.integers(0, 2**32 - 1)


def _family_spec(seed, K=30, **kw):
    rng = np.random.default_rng(seed)
    pair = random_pair(rng, d_max=3, p_max=2, **kw)
    fam = build_inner_family(pair, K, N=64)
    return SystemSpec.from_family(fam), fam, rng


def _random_inputs(rng, spec, T):
    return [rng.standard_normal(spec.stages[j].u) + 1j * rng.standard_normal(spec.stages[j].u) for j in range(T + 1)]


def test_simulation_matches_closed_form_100_runs():
    rng = np.random.default_rng(11)
    worst = 0.0
    specs = [_family_spec(s)[0] for s in range(5)]
    for _ in range(100):
        spec = specs[int(rng.integers(len(specs)))]
        T = int(rng.integers(0, 31))
        x0 = rng.standard_normal(spec.pair.d) + 1j * rng.standard_normal(spec.pair.d)
        us = _random_inputs(rng, spec, T)
        a, b = simulate(spec, x0, us, T), closed_form_trace(spec, x0, us, T)
        for ya, yb in zip(a.outputs, b.outputs):
            worst = max(worst, np.max(np.abs(ya - yb)) / max(1.0, np.max(np.abs(yb))))
        for xa, xb in zip(a.states, b.states):
            worst = max(worst, np.max(np.abs(xa - xb)) / max(1.0, np.max(np.abs(xb))))
    assert worst <= 1e-10


@settings(max_examples=20)
@given(seeds)
def test_superposition(seed):
    spec, _, rng = _family_spec(seed, K=8)
    T = 8
    x0 = rng.standard_normal(spec.pair.d)
    u1, u2 = _random_inputs(rng, spec, T), _random_inputs(rng, spec, T)
    a, b = 0.7 - 0.2j, -1.3
    mixed = simulate(spec, a * x0, [a * p + b * q for p, q in zip(u1, u2)], T)
    y1 = simulate(spec, x0, u1, T).outputs
    y2 = simulate(spec, 0 * x0, u2, T).outputs
    for j in range(T + 1):
        ref = a * y1[j] + b * y2[j]
        assert np.max(np.abs(mixed.outputs[j] - ref)) <= 1e-10 * max(1.0, np.max(np.abs(ref)))


def test_n1_is_classical_time_varying_system():
    spec, _, rng = _family_spec(5, K=10, n=1)
    x0 = rng.standard_normal(spec.pair.d)
    us = _random_inputs(rng, spec, 10)
    tr = simulate(spec, x0, us, 10)
    x = x0.astype(complex)
    for j in range(11):
        st_j = spec.stages[j]
        np.testing.assert_allclose(tr.outputs[j], spec.pair.C @ x + st_j.D @ us[j], atol=1e-12)
        x = spec.pair.A @ x + st_j.B @ us[j]


def test_pulse_responses_match_theta_coefficients():
    spec, fam, _ = _family_spec(3, K=12)
    for k in (0, 3, 7):
        u = np.zeros(spec.stages[k].u)
        u[0] = 1
        inputs = [np.zeros(st_.u) for st_ in spec.stages]
        inputs[k] = u
        tr = simulate(spec, np.zeros(spec.pair.d), inputs, 12)
        for j in range(12 + 1):
            ref = fam.thetas[k].coeffs[j - k, :, 0] if j >= k else 0 * tr.outputs[j]
            np.testing.assert_allclose(tr.outputs[j], ref, atol=1e-10)


@settings(max_examples=15)
@given(seeds)
def test_ztransform_and_energy(seed):
    spec, fam, rng = _family_spec(seed, K=12)
    x0 = rng.standard_normal(spec.pair.d) + 1j * rng.standard_normal(spec.pair.d)
    us = _random_inputs(rng, spec, 12)
    assert ztransform_reconcile(spec, x0, us, 12).passed
    rep = energy_audit(spec, fam.grams, x0, us, N=256)
    assert rep.passed, rep.summary()


@settings(max_examples=15)
@given(seeds)
def test_weighted_colligation_is_unitary(seed):
    spec, fam, _ = _family_spec(seed, K=10)
    rep = weighted_colligation_audit(spec, fam.grams)
    assert rep.passed, rep.summary()


def test_zero_input_defect():
    # with B = 0 the input block of the defect is binom(n+k-1, k) D*D - I
    pair = random_pair(np.random.default_rng(2), d=2, p=1, n=3)
    g = gramians(pair, k_max=4)
    for k in range(3):
        stage = StageColligation(k, np.zeros((2, 1)), np.zeros((1, 1)))
        X = weighted_isometry_defect(pair, stage, g)
        np.testing.assert_allclose(X[:2, :2], np.zeros((2, 2)), atol=1e-10 * np.linalg.norm(g.GG(k)))
        assert X[2, 2].real == pytest.approx(-1.0)
        stage = StageColligation(k, np.zeros((2, 1)), np.ones((1, 1)))
        X = weighted_isometry_defect(pair, stage, g)
        assert X[2, 2].real == pytest.approx(comb(k + 2, k) - 1)


def test_refusals():
    spec, _, _ = _family_spec(1, K=3)
    us = [np.zeros(st_.u) for st_ in spec.stages] + [np.zeros(1)]
    with pytest.raises(DomainError):
        simulate(spec, np.zeros(spec.pair.d), us, 4)
    bad = [np.zeros(st_.u) for st_ in spec.stages]
    bad[2] = np.zeros(spec.stages[2].u + 1)
    with pytest.raises(DimensionError, match="step 2"):
        simulate(spec, np.zeros(spec.pair.d), bad, 3)
    with pytest.raises(DimensionError):
        simulate(spec, np.zeros(spec.pair.d + 1), us[:4], 3)
    pair = OutputPair([[0.5]], [[1.0]], 1)
    with pytest.raises(DomainError):
        SystemSpec(pair, (StageColligation(1, [[1.0]], [[0.0]]),))
