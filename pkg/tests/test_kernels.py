import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gamma as Gamma

from rmtlab.kernels import (
    _airy_complex,
    airy,
    airy_kernel,
    fredholm_det,
    make_kernel,
    pearcey_kernel,
    pearcey_p,
    pearcey_q,
    sine_kernel,
)


def test_airy_values_at_zero():
    a, ap = airy(0.0)
    assert abs(a - 1 / (3 ** (2 / 3) * Gamma(2 / 3))) < 1e-13
    assert abs(ap + 1 / (3 ** (1 / 3) * Gamma(1 / 3))) < 1e-13


def test_airy_large_x_asymptote():
    for x in (20.0, 50.0):
        a, _ = airy(x)
        assert abs(a * 2 * math.sqrt(math.pi) * x**0.25 * math.exp(2 / 3 * x**1.5) - 1) < 0.2 / x**1.5


def test_airy_against_scipy_grid():
    from scipy.special import airy as sairy

    x = np.linspace(-15, 10, 501)
    a, ap = airy(x)
    ra, rap, _, _ = sairy(x)
    assert np.max(np.abs(a - ra)) < 1e-12 and np.max(np.abs(ap - rap)) < 1e-11


def test_airy_connection_formula():
    w = cmath.exp(2j * math.pi / 3)
    rng = np.random.default_rng(3)
    z = rng.uniform(-3, 3, 10) + 1j * rng.uniform(-3, 3, 10)
    s = _airy_complex(z)[0] + w * _airy_complex(w * z)[0] + w * w * _airy_complex(w * w * z)[0]
    assert np.max(np.abs(s)) < 1e-10


def test_sine_kernel_examples():
    assert sine_kernel(0.3, 0.3) == pytest.approx(1.0)
    assert abs(sine_kernel(1.2, 0.2)) < 1e-15
    assert sine_kernel(0.5, 0.0) == pytest.approx(2 / math.pi, rel=1e-14)


def test_airy_kernel_examples():
    assert airy_kernel(0.0, 0.0) == pytest.approx(airy(0.0)[1] ** 2, rel=1e-12)
    assert abs(airy_kernel(0.0, 0.0) - 0.066987) < 1e-6
    assert airy_kernel(8.0, 8.0) < 1e-9


@settings(max_examples=50, deadline=None)
@given(st.floats(-6, 6), st.floats(-6, 6))
def test_kernel_symmetry(u, v):
    assert abs(airy_kernel(u, v) - airy_kernel(v, u)) < 1e-12
    assert abs(sine_kernel(u, v) - sine_kernel(v, u)) < 1e-15


def test_pearcey_p_at_origin():
    assert abs(pearcey_p(0.0, 0.0) - Gamma(0.25) / (math.pi * 4**0.75)) < 1e-12


def test_pearcey_parity():
    x = np.linspace(0.1, 3, 7)
    for b in (-1.0, 0.5):
        assert np.allclose(pearcey_p(-x, b), pearcey_p(x, b), atol=1e-13)
        # the contour orientation that keeps q real makes it odd
        assert np.allclose(pearcey_q(-x, b), -pearcey_q(x, b), atol=1e-12)


def test_pearcey_kernel_diagonal_and_reality():
    for x in (0.0, 1.0):
        assert abs(pearcey_kernel(x, x + 1e-6, 0.0) - pearcey_kernel(x, x, 0.0)) < 1e-4
    rng = np.random.default_rng(5)
    vals = pearcey_kernel(rng.uniform(-2, 2, 20), rng.uniform(-2, 2, 20), 0.3)
    assert np.all(np.isfinite(vals)) and vals.dtype == float


def test_fredholm_examples():
    K = make_kernel("sine")
    assert fredholm_det(K, (0.0, 0.0)) == 1.0
    assert abs(fredholm_det(K, (0.0, 0.1)) - 0.9) < 1e-3
    for iv in [(0.0, 1.0), (-1.0, 2.0)]:
        d = fredholm_det(K, iv)
        assert 0 < d <= 1
    d = fredholm_det(make_kernel("airy"), (-1.0, 12.0))
    assert 0 < d <= 1


def test_make_kernel_unknown():
    with pytest.raises(ValueError):
        make_kernel("bessel")
