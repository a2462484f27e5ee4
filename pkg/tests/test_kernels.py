import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import hermite_e
from scipy.special import j0 as scipy_j0

from nodalwaves._validation import DimensionError
from nodalwaves.kernels import (SERIES_THRESHOLD, bessel_j0, delta_coefficient,
                                gaussian_half_moment, hermite, multi_hermite, sinc_kernel)


@pytest.mark.parametrize("n, x, expected", [(2, 0.0, -1.0), (4, 0.0, 3.0), (3, 2.0, 2.0)])
def test_hermite_examples(n, x, expected):
    assert hermite(n, x) == pytest.approx(expected, abs=1e-15)


def test_hermite_matches_explicit_expansion():
    rng = np.random.default_rng(0)
    x = rng.uniform(-5, 5, 100)
    for n in range(11):
        explicit = hermite_e.hermeval(x, [0] * n + [1])
        np.testing.assert_allclose(hermite(n, x), explicit, rtol=1e-12, atol=1e-12)


def test_hermite_orthogonality_gauss_hermite():
    nodes, weights = hermite_e.hermegauss(40)
    weights = weights / math.sqrt(2 * math.pi)
    for p in range(7):
        for q in range(7):
            value = np.sum(weights * hermite(p, nodes) * hermite(q, nodes))
            expected = math.factorial(p) if p == q else 0.0
            assert value == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize("alpha, y, expected", [
    ((0, 0, 0), (5, 5, 5), 1.0), ((2, 0), (1, 9), 0.0), ((2, 2), (2, 2), 9.0)])
def test_multi_hermite_examples(alpha, y, expected):
    assert multi_hermite(alpha, np.array(y, float)) == pytest.approx(expected)


def test_multi_hermite_rejects_length_mismatch():
    with pytest.raises(DimensionError):
        multi_hermite((1, 2), np.zeros(3))


def test_delta_coefficients():
    assert delta_coefficient(0) == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-15)
    assert delta_coefficient(1) == 0.0
    assert delta_coefficient(4) == pytest.approx(1 / (8 * math.sqrt(2 * math.pi)), rel=1e-15)


def test_sinc_kernel_at_zero():
    kv = sinc_kernel(0.0)
    assert (kv.r, kv.r1, kv.r2, kv.A, kv.B) == pytest.approx((1, 0, -1 / 3, 0, -1 / 3),
                                                                abs=1e-15)


def test_sinc_kernel_closed_forms():
    kv = sinc_kernel(math.pi)
    assert kv.r == pytest.approx(0, abs=1e-15)
    assert kv.r1 == pytest.approx(-1 / math.pi, rel=1e-14)
    assert kv.B == pytest.approx(-1 / math.pi**2, rel=1e-14)
    assert kv.A == pytest.approx(-3 / math.pi**2, rel=1e-14)
    kv = sinc_kernel(math.pi / 2)
    assert kv.r == pytest.approx(2 / math.pi, rel=1e-14)
    assert kv.r1 == pytest.approx(-4 / math.pi**2, rel=1e-14)


def _closed(u):
    s, c = math.sin(u), math.cos(u)
    r, r1 = s / u, (u * c - s) / u**2
    r2 = (-u * u * s - 2 * u * c + 2 * s) / u**3
    return r, r1, r2, r1 / u - r2, r1 / u


def test_series_and_closed_form_agree_at_seam():
    for u in np.linspace(SERIES_THRESHOLD / 2, 2 * SERIES_THRESHOLD, 25):
        kv = sinc_kernel(u)
        # closed forms lose digits to cancellation; 1e-10 is the agreed seam tolerance
        np.testing.assert_allclose((kv.r, kv.r1, kv.r2, kv.A, kv.B), _closed(u), atol=1e-10)


@given(st.floats(min_value=SERIES_THRESHOLD, max_value=200.0))
def test_kernel_identities(u):
    kv = sinc_kernel(u)
    assert kv.A == pytest.approx(kv.r1 / u - kv.r2, abs=1e-12)
    assert kv.B == pytest.approx(kv.r1 / u, abs=1e-12)
    # Helmholtz: r'' + 2 r'/u + r = 0
    assert kv.r2 + 2 * kv.r1 / u + kv.r == pytest.approx(0, abs=1e-12)


@given(st.floats(min_value=0.0, max_value=1e3))
def test_sinc_bounded(u):
    assert abs(float(sinc_kernel(u).r)) <= 1.0 + 1e-15


def test_half_moments():
    assert gaussian_half_moment(0) == 0.5
    assert gaussian_half_moment(5) / gaussian_half_moment(3) == 4.0
    assert gaussian_half_moment(7) / gaussian_half_moment(3) == 24.0
    for k in range(1, 20):
        assert gaussian_half_moment(k + 1) == pytest.approx(
            k * gaussian_half_moment(k - 1), rel=1e-15)


def test_half_moments_against_quadrature():
    from scipy.integrate import quad

    for k in range(8):
        ref, _ = quad(lambda x: x**k * math.exp(-x * x / 2) / math.sqrt(2 * math.pi), 0, np.inf)
        assert gaussian_half_moment(k) == pytest.approx(ref, rel=1e-10)


def test_bessel_examples():
    assert bessel_j0(0.0) == 1.0
    assert abs(bessel_j0(2.404825557695773)) < 1e-10
    assert bessel_j0(1.0) == pytest.approx(0.7651976866, abs=1e-9)


def test_bessel_against_scipy():
    x = np.linspace(0, 80, 4001)
    np.testing.assert_allclose(bessel_j0(x), scipy_j0(x), atol=1e-12)


def test_bessel_rejects_negative():
    with pytest.raises(ValueError):
        bessel_j0(-1.0)
