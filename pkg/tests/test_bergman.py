from math import comb

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from blax.bergman import (
    KERNEL_KINDS,
    BergmanElement,
    cauchy_dual_checks,
    default_grid,
    default_grid_points,
    gram,
    inner,
    isometry_ladder_residual,
    kernel_eval,
    model_pair,
    model_shifted_gramian_diag,
    observability_apply,
    observability_table,
    shift_adjoint_apply,
    shift_apply,
    smperp_decomposition_check,
)
from blax.errors import DomainError, ObservabilityError
from blax.serieskernels import SeriesSpec, r_eval
from blax.statespace import OutputPair, gramian_series, gramians, random_pair, shifted_gramian_series

seeds = st.integers(0, 2**32 - 1)


def _element(seed, n, N=20, p=2):
    rng = np.random.default_rng(seed)
    c = rng.standard_normal((N + 1, p)) + 1j * rng.standard_normal((N + 1, p))
    return BergmanElement(n, c)


def test_norm_of_monomials():
    for n in (1, 2, 4):
        for j in (0, 3, 7):
            c = np.zeros(10)
            c[j] = 1
            assert BergmanElement(n, c).norm_sq() == pytest.approx(1 / comb(j + n - 1, j))


@given(seeds, st.integers(1, 5))
def test_shift_adjointness(seed, n):
    f, g = _element(seed, n), _element(seed + 1, n)
    f = BergmanElement(n, np.vstack([f.coeffs[:-1], np.zeros((1, 2))]))
    lhs = inner(shift_apply(f), g)
    rhs = inner(f, shift_adjoint_apply(g))
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, f.norm() * g.norm())


@given(seeds, st.integers(1, 5))
def test_isometry_ladder(seed, n):
    # trailing zeros keep the truncated shift exact
    f = _element(seed, n, N=30)
    c = f.coeffs.copy()
    c[20:] = 0
    assert isometry_ladder_residual(BergmanElement(n, c)) <= 1e-12


def test_shift_is_expansive_for_n_at_least_two():
    f = BergmanElement(3, np.r_[np.ones(10), np.zeros(5)])
    assert shift_apply(f).norm_sq() <= f.norm_sq()
    assert shift_adjoint_apply(shift_apply(f)).norm_sq() <= f.norm_sq() + 1e-15


@given(seeds)
def test_observability_norm_matches_gramian(seed):
    rng = np.random.default_rng(seed)
    pair = random_pair(rng)
    x = rng.standard_normal(pair.d) + 1j * rng.standard_normal(pair.d)
    G = gramians(pair, k_max=0, crosscheck=False).G(pair.n)
    f = observability_apply(pair, 0, x, 600)
    ref = float(np.real(x.conj() @ G @ x))
    assert abs(f.norm_sq() - ref) <= 1e-8 * ref


def test_gram_matches_shifted_gramian():
    pair = random_pair(np.random.default_rng(3), n=2)
    for k in (1, 3):
        # ||S^k O_k x||^2 = x* GG_k x
        T = observability_table(pair, k, 700 + k).shift(k)
        ref = shifted_gramian_series(pair, k, terms=700)
        got = gram(T, T, pair.n)
        assert np.linalg.norm(got - ref) <= 1e-10 * np.linalg.norm(ref)
    T0 = observability_table(pair, 0, 700)
    G = gramians(pair, k_max=0, crosscheck=False).G(pair.n)
    assert np.linalg.norm(gram(T0, T0, pair.n) - G) <= 1e-10 * np.linalg.norm(G)


def test_model_pair_gramians():
    for n in (2, 3, 4):
        N = 100
        pair = model_pair(n, N)
        G = gramian_series(pair, n, terms=N + 2)
        np.testing.assert_allclose(G, np.eye(N), atol=1e-12)
        Gm = np.diag(gramian_series(pair, n - 1, terms=N + 2)).real
        np.testing.assert_allclose(Gm, [(n - 1) / (n + j - 1) for j in range(N)], rtol=1e-12)
        assert Gm[-1] < 2 * (n - 1) / N
        GG = np.diag(shifted_gramian_series(pair, 2, terms=N + 2)).real
        np.testing.assert_allclose(GG[:10], [float(model_shifted_gramian_diag(n, 2, j)) for j in range(10)], rtol=1e-12)


def test_model_shifted_gramian_dominates_identity():
    for n in (1, 2, 3):
        pair = model_pair(n, 30)
        for k in (1, 2, 5):
            GG = shifted_gramian_series(pair, k, terms=32)
            assert np.linalg.eigvalsh(GG - np.eye(30))[0] >= -1e-12


def test_default_grid():
    pts = default_grid_points()
    assert len(pts) == 17 and pts[0] == 0
    assert max(abs(z) for z in pts) == pytest.approx(0.9)
    assert len(default_grid()) == 17**2


def test_onezero_kM_at_origin():
    pair = OutputPair([[0.5]], [[0.75]], 2)
    g = gramians(pair, k_max=3)
    kM = kernel_eval("kM", pair, g, [(0, 0)])
    assert kM.values[0, 0, 0].real == pytest.approx(0.4375, abs=1e-14)


@given(seeds, st.sampled_from(KERNEL_KINDS))
def test_kernels_are_hermitian(seed, kind):
    pair = random_pair(np.random.default_rng(seed), d_max=3, p_max=2)
    g = gramians(pair, k_max=4, crosscheck=False)
    grid = default_grid(moduli=(0.0, 0.5, 0.9), phases=3)
    kg = kernel_eval(kind, pair, g, grid, H=g.G(pair.n), k=2)
    assert kg.hermitian_defect() <= 1e-10


def test_kscm_n1_reduces_to_geometric_kernel():
    pair = random_pair(np.random.default_rng(5), n=1, p=1)
    g = gramians(pair, k_max=3)
    for z, w in [(0.3, 0.5j), (0.9, -0.9)]:
        v = kernel_eval("kscm", pair, g, [(z, w)], k=1).values[0, 0, 0]
        fk = kernel_eval("frakK", pair, g, [(z, w)], k=1).values[0, 0, 0]
        x = z * np.conj(w)
        assert abs(v + fk - x * r_eval(SeriesSpec(1, 1), x)) <= 1e-12


def test_kernel_errors():
    pair = random_pair(np.random.default_rng(1))
    g = gramians(pair, k_max=2)
    with pytest.raises(DomainError):
        kernel_eval("bogus", pair, g, [(0, 0)])
    with pytest.raises(DomainError):
        kernel_eval("kdif", pair, g, [(0, 0)])
    with pytest.raises(DomainError):
        kernel_eval("K", pair, g, [(0, 0)])
    dead = OutputPair(np.diag([0.5, 0.2]), [[1.0, 0.0]], 2)
    with pytest.raises(ObservabilityError):
        kernel_eval("kM", dead, gramians(dead, k_max=1), [(0, 0)])


@pytest.mark.parametrize("k", [1, 2, 3])
def test_smperp_decomposition(k):
    pair = random_pair(np.random.default_rng(10 + k), d=2, p=1, n=2)
    rep = smperp_decomposition_check(pair, k, 40)
    assert rep.passed, rep.summary()


def test_smperp_requires_observability():
    dead = OutputPair(np.diag([0.5, 0.2]), [[0.0, 0.0]], 2)
    with pytest.raises(ObservabilityError):
        smperp_decomposition_check(dead, 1, 20)


@pytest.mark.parametrize("n", [1, 2, 4])
def test_cauchy_dual_relations(n):
    rep = cauchy_dual_checks(n, 4, 60, seed=n)
    assert rep.passed, rep.summary()
