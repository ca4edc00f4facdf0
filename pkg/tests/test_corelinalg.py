import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from blax.corelinalg import (
    canonical_phase,
    hermitian_inv_sqrt,
    hermitian_sqrt,
    inverse,
    min_eigenvalue,
    psd_factor,
    solve_linear,
    spectral_radius,
)
from blax.errors import DimensionError, DomainError, NotPSDError, SingularityError


def _random_psd(seed, d, r):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((d, r)) + 1j * rng.standard_normal((d, r))
    return X @ X.conj().T


def test_psd_factor_known_values():
    V = psd_factor(np.diag([4.0, 0.0, 1.0]))
    assert V.shape == (3, 2)
    np.testing.assert_allclose(V @ V.conj().T, np.diag([4.0, 0.0, 1.0]), atol=1e-14)
    # columns ordered by decreasing eigenvalue, largest entry real positive
    np.testing.assert_allclose(np.abs(V[:, 0]), [2, 0, 0], atol=1e-14)
    assert V[0, 0].real > 0 and V[0, 0].imag == 0


def test_psd_factor_zero_matrix_has_no_columns():
    assert psd_factor(np.zeros((3, 3))).shape == (3, 0)


def test_psd_factor_rejects_indefinite_and_non_hermitian():
    with pytest.raises(NotPSDError) as exc:
        psd_factor(np.diag([1.0, -0.5]))
    assert exc.value.min_eigenvalue == pytest.approx(-0.5)
    with pytest.raises(DomainError):
        psd_factor(np.array([[1.0, 1.0], [0.0, 1.0]]))


@given(st.integers(0, 10**6), st.integers(1, 6), st.data())
def test_psd_factor_reconstructs(seed, d, data):
    r = data.draw(st.integers(1, d))
    M = _random_psd(seed, d, r)
    V = psd_factor(M)
    assert V.shape[1] == r
    assert np.linalg.norm(V @ V.conj().T - M) <= 1e-10 * np.linalg.norm(M)


def test_psd_factor_200_random():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(200):
        d = int(rng.integers(1, 7))
        M = _random_psd(int(rng.integers(1 << 30)), d, int(rng.integers(1, d + 1)))
        V = psd_factor(M)
        worst = max(worst, np.linalg.norm(V @ V.conj().T - M) / np.linalg.norm(M))
    assert worst <= 1e-10


@given(st.integers(0, 10**6), st.integers(1, 5))
def test_spectral_radius_similarity_invariant(seed, d):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    T = np.eye(d) + 0.3 * (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)))
    r = spectral_radius(M)
    assert abs(spectral_radius(T @ M @ np.linalg.inv(T)) - r) <= 1e-8 * max(1.0, r)


def test_spectral_radius_examples():
    assert spectral_radius([[0.5]]) == 0.5
    assert spectral_radius(np.diag([1.0, 0.5])) == 1.0
    assert spectral_radius([[0, 1], [0, 0]]) == 0.0
    with pytest.raises(DimensionError):
        spectral_radius(np.ones((2, 3)))


def test_solve_linear_and_inverse():
    A = np.array([[2.0, 1.0], [0.0, 4.0]])
    np.testing.assert_allclose(solve_linear(A, [1.0, 4.0]), [0.0, 1.0])
    np.testing.assert_allclose(inverse(A) @ A, np.eye(2), atol=1e-15)
    with pytest.raises(SingularityError) as exc:
        solve_linear(np.array([[1.0, 1.0], [1.0, 1.0]]), np.eye(2))
    assert exc.value.cond is not None and exc.value.cond >= 1e12
    with pytest.raises(DimensionError):
        solve_linear(A, np.ones(3))


def test_square_roots():
    M = _random_psd(3, 4, 4)
    R = hermitian_sqrt(M)
    np.testing.assert_allclose(R @ R, M, atol=1e-10 * np.linalg.norm(M))
    Ri = hermitian_inv_sqrt(M)
    np.testing.assert_allclose(Ri @ M @ Ri, np.eye(4), atol=1e-9)
    with pytest.raises(SingularityError):
        hermitian_inv_sqrt(np.diag([1.0, 0.0]))
    with pytest.raises(NotPSDError):
        hermitian_sqrt(np.diag([1.0, -1.0]))


def test_non_finite_input_rejected():
    with pytest.raises(DomainError):
        spectral_radius([[np.nan]])


def test_canonical_phase_and_min_eigenvalue():
    V = canonical_phase(np.array([[1j], [0.5]]))
    np.testing.assert_allclose(V[:, 0], [1.0, -0.5j])
    assert min_eigenvalue(np.diag([3.0, -2.0])) == pytest.approx(-2.0)
