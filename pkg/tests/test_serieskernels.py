from fractions import Fraction
from math import comb

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from blax.bergman import default_grid_points
from blax.errors import DomainError
from blax.serieskernels import (
    SeriesSpec,
    mu,
    r_coeff,
    r_combination,
    r_eval,
    r_series,
    r_shifted_difference,
    rnk_matrix,
    rnk_poly_coeffs,
    truncated_sum,
    truncated_sum_closed,
    verify_series_identities,
    weights,
)

points = st.builds(
    lambda r, t: complex(r * np.cos(t), r * np.sin(t)),
    st.floats(0.0, 0.9),
    st.floats(0.0, 2 * np.pi),
)


def test_rnk_known_values():
    # R_{2,1}(z) = sum_j (j+2) z^j = (2 - z) / (1 - z)^2, so R_{2,1}(1/2) = 6
    assert r_eval(SeriesSpec(2, 1), 0.5) == pytest.approx(6.0, rel=1e-15)
    assert rnk_poly_coeffs(2, 1) == (2, -1)
    # R_{n,k}(0) is the leading coefficient binom(n+k-1, k)
    assert r_eval(SeriesSpec(3, 4), 0) == comb(6, 4)
    assert r_eval(SeriesSpec(2, 0), 0.5) == pytest.approx(4.0)


def test_mu_values():
    assert mu(2, 3) == Fraction(1, 4)
    assert mu(1, 7) == 1
    assert mu(3, 2) == Fraction(1, 6)
    np.testing.assert_allclose(weights(2, 3), [1, 1 / 2, 1 / 3, 1 / 4])


def test_mu_times_binomial_is_one():
    for n in range(1, 8):
        for j in range(60):
            assert mu(n, j) * comb(j + n - 1, j) == 1


@given(st.integers(0, 12), points)
def test_n1_series_are_geometric(k, z):
    s = SeriesSpec(1, k)
    assert all(r_coeff(s, j) == 1 for j in range(30))
    assert abs(r_eval(s, z) - 1 / (1 - z)) <= 1e-12 * abs(1 / (1 - z))


def test_closed_form_matches_shifted_difference_on_grid():
    # The difference quotient cancels badly for small |z|, so it is only a grid reference.
    for n in range(1, 7):
        for k in range(11):
            s = SeriesSpec(n, k)
            for z in default_grid_points():
                a, b = r_eval(s, z), r_shifted_difference(s, z)
                assert abs(a - b) <= 1e-10 * max(1.0, abs(b))


@given(st.integers(1, 6), st.integers(0, 10), points)
def test_closed_form_matches_power_series_at_random_points(n, k, z):
    s = SeriesSpec(n, k)
    ref = r_series(s, z, 900)
    assert abs(r_eval(s, z) - ref) <= 1e-10 * max(1.0, r_series(s, abs(z), 900).real)


@given(st.integers(1, 6), st.integers(1, 10), points)
def test_closed_form_matches_resolvent_combination(n, k, z):
    s = SeriesSpec(n, k)
    assert abs(r_eval(s, z) - r_combination(s, z)) <= 1e-10 * max(1.0, abs(r_combination(s, z)))


def test_closed_form_matches_power_series():
    # 700 terms: at |z| = 0.9 the tail of the n = 4 series is still ~6e-7 after 300 terms
    worst = 0.0
    for n in range(1, 6):
        for k in (0, 1, 3, 10):
            s = SeriesSpec(n, k)
            for z in default_grid_points():
                ref = r_series(s, z, 700)
                abs_sum = r_series(s, abs(z), 700).real
                worst = max(worst, abs(r_eval(s, z) - ref) / max(1.0, abs_sum))
    assert worst <= 1e-10


def test_truncated_sum_closed_form():
    for n in (1, 2, 5):
        for N in (0, 3, 17):
            z = 0.4 - 0.3j
            assert truncated_sum(n, N, z) == pytest.approx(truncated_sum_closed(n, N, z), rel=1e-12)


def test_matrix_argument_reduces_to_scalar():
    A = np.diag([0.3, -0.5j])
    z = 0.6 + 0.2j
    M = rnk_matrix(3, 2, z, A)
    np.testing.assert_allclose(np.diag(M), [r_eval(SeriesSpec(3, 2), z * a) for a in (0.3, -0.5j)], rtol=1e-12)


def test_identity_report_passes_on_default_grid():
    rep = verify_series_identities(4, 10, 40, default_grid_points())
    assert rep.passed, rep.summary()
    assert rep["chu_vandermonde"].residual == 0


def test_domain_errors():
    with pytest.raises(DomainError):
        SeriesSpec(0, 1)
    with pytest.raises(DomainError):
        SeriesSpec(2, -1)
    with pytest.raises(DomainError):
        r_eval(SeriesSpec(2, 1), 1.0)
    with pytest.raises(DomainError):
        verify_series_identities(2, 2, 5, [0.95])
    with pytest.raises(DomainError):
        r_combination(SeriesSpec(2, 0), 0.1)
