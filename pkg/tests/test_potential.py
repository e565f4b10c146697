import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rmtlab.potential import Potential


def test_eval_examples():
    assert Potential.gaussian()(3.0) == 9.0
    V = Potential([0.0, -1.0, 0.0, 0.25])
    assert V(2.0) == 0.0
    assert V(0.0) == 0.0


def test_derivative_examples():
    assert np.allclose(Potential.gaussian().derivative().coef, [0.0, 2.0])
    t = -1.3
    assert np.allclose(Potential.quartic(t).derivative().coef, [0.0, t, 0.0, 1.0])
    assert np.allclose(Potential([0.0, -1.0, 0.0, 0.25]).derivative().coef, [0.0, -2.0, 0.0, 1.0])


def test_deform_identity_and_quartic_family():
    V = Potential([0.0, -1.0, 0.0, 0.25])
    assert np.allclose(V.deform(1.0).coeffs, V.coeffs)
    t = 2.5
    assert np.allclose(V.deform(t).coeffs, [0.0, 1.0 - 2.0 / t, 0.0, 1.0 / (4.0 * t * t)])


def test_deform_rejects_small_t():
    with pytest.raises(ValueError):
        Potential.gaussian().deform(0.5)


def test_parse_and_json_roundtrip():
    V = Potential.parse("0,-1,0,0.25")
    assert np.allclose(V.coeffs, [0.0, -1.0, 0.0, 0.25])
    W = Potential.parse(V.to_json())
    assert np.allclose(W.coeffs, V.coeffs)
    assert json.loads(V.to_json()) == [0.0, -1.0, 0.0, 0.25]


@pytest.mark.parametrize("coeffs", [[0.0, -1.0], [0.0, 1.0, 1.0], [0.0, 0.0, 0.0, -1.0]])
def test_rejects_non_confining(coeffs):
    with pytest.raises(ValueError):
        Potential(coeffs)


@settings(max_examples=40, deadline=None)
@given(
    st.floats(1.0, 5.0), st.floats(1.0, 5.0),
    st.lists(st.floats(-2.0, 2.0), min_size=3, max_size=3), st.floats(0.1, 2.0),
)
def test_deform_composes(s, t, low, top):
    V = Potential(low + [top])
    lhs = V.deform(s).deform(t).coeffs
    rhs = V.deform(s * t).coeffs
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(-3.0, 3.0), st.floats(-3.0, 3.0))
def test_quartic_eval_matches_formula(t, x):
    V = Potential.quartic(t)
    assert math.isclose(V(x), t * x * x / 2 + x**4 / 4, rel_tol=1e-12, abs_tol=1e-12)
