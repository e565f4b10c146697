import math

import numpy as np
import pytest
from scipy import integrate

from rmtlab.errors import NonPositiveGamma
from rmtlab.orthopoly import (
    RecurrenceTable,
    cd_kernel,
    correlation_function,
    dv_derivatives,
    hamiltonian,
    hamiltonian_gradient,
    kernel_sum,
    minimize_hamiltonian,
    psi,
    psi_all,
    recurrence_from_weight,
    string_residual,
    vprime_of_Q,
)
from rmtlab.potential import Potential

GAUSS = Potential.gaussian()


def test_gaussian_recurrence_and_h0():
    tab = recurrence_from_weight(GAUSS, 10, 50)
    assert np.allclose(tab.gamma_sq[1:], np.arange(1, 51) / 20, atol=1e-10)
    assert np.max(np.abs(tab.beta)) < 1e-12
    assert math.isclose(recurrence_from_weight(GAUSS, 1, 2).h[0], math.sqrt(math.pi), rel_tol=1e-12)


def test_gamma_sq_is_h_ratio():
    tab = recurrence_from_weight(Potential.quartic(-1.0), 6, 20)
    assert np.allclose(tab.gamma_sq[1:], tab.h[1:] / tab.h[:-1], rtol=1e-10)


def test_gamma1_against_direct_quadrature():
    V, N = Potential.quartic(-1.0), 3.0
    w = lambda x: math.exp(-N * V(x))
    num = integrate.quad(lambda x: x * x * w(x), -np.inf, np.inf, epsabs=1e-14)[0]
    den = integrate.quad(w, -np.inf, np.inf, epsabs=1e-14)[0]
    tab = recurrence_from_weight(V, N, 4)
    assert math.isclose(tab.gamma_sq[1], num / den, rel_tol=1e-10)


def test_vprime_of_q_examples():
    tab = RecurrenceTable.gaussian(5, 12)
    W = vprime_of_Q(GAUSS, tab, 8)
    n = np.arange(1, 8)
    assert np.allclose(W[n, n - 1], 2 * tab.gamma[n])
    t = -1.0
    V = Potential.quartic(t)
    tab = recurrence_from_weight(V, 7, 14)
    W = vprime_of_Q(V, tab, 10)
    g2 = tab.gamma_sq
    for k in range(1, 8):
        assert math.isclose(W[k, k - 1], tab.gamma[k] * (t + g2[k - 1] + g2[k] + g2[k + 1]), rel_tol=1e-12)
        assert abs(W[k, k]) < 1e-12


def test_string_residual_examples():
    tab = RecurrenceTable.gaussian(10, 12)
    assert np.allclose(string_residual(GAUSS, tab, 5), (0.0, 0.0), atol=1e-12)
    V = Potential.quartic(-1.0)
    tab = recurrence_from_weight(V, 20, 12)
    r = string_residual(V, tab, 5)
    assert abs(r[0]) < 1e-7 and abs(r[1]) < 1e-7
    bumped = RecurrenceTable(tab.N, tab.gamma.copy(), tab.beta, tab.log_h)
    bumped.gamma[5] += 0.01
    assert abs(string_residual(V, bumped, 5)[0]) > 1e-4


def test_hamiltonian_gradient_and_explicit_sum():
    t, N, M = -1.0, 6.0, 8
    V = Potential.quartic(t)
    rng = np.random.default_rng(1)
    g = 0.5 + rng.random(M - 1)
    b = np.zeros(M)
    dg, db = hamiltonian_gradient(V, g, b, N, M)
    for k in range(M - 1):
        e = np.zeros(M - 1)
        e[k] = 1e-6
        fd = (hamiltonian(V, g + e, b, N, M) - hamiltonian(V, g - e, b, N, M)) / 2e-6
        assert math.isclose(fd, dg[k], rel_tol=1e-6, abs_tol=1e-6)
    for k in range(M):
        e = np.zeros(M)
        e[k] = 1e-6
        fd = (hamiltonian(V, g, b + e, N, M) - hamiltonian(V, g, b - e, N, M)) / 2e-6
        assert abs(fd - db[k]) < 1e-6
    y = g**2
    n = np.arange(1, M)
    explicit = N * (t * y.sum() + 0.5 * np.sum(y**2) + np.sum(y[:-1] * y[1:])) - np.sum(n * np.log(y))
    assert math.isclose(hamiltonian(V, g, b, N, M), explicit, rel_tol=1e-12)
    with pytest.raises(NonPositiveGamma):
        hamiltonian(V, -g, b, N, M)


def test_minimizer_profiles():
    V = Potential.quartic(-1.0)
    res = minimize_hamiltonian(V, 400, M=600)  # n = N stays clear of the truncation layer
    assert abs(res.gamma_sq[400 - 1] - (1 + math.sqrt(13)) / 6) < 0.02
    n = 75  # n/N = 3/16
    pair = sorted([res.gamma_sq[n - 1], res.gamma_sq[n]])
    assert abs(pair[0] - 0.25) < 0.02 and abs(pair[1] - 0.75) < 0.02


def test_psi_orthonormal_and_recurrence():
    tab = RecurrenceTable.gaussian(10, 32)
    x, w = np.polynomial.legendre.leggauss(400)
    x, w = 4 * x, 4 * w
    P = psi_all(tab, GAUSS, x, 30)
    G = (P * w) @ P.T
    assert np.max(np.abs(G - np.eye(31))) < 1e-8
    xs = np.linspace(-2, 2, 11)
    P = psi_all(tab, GAUSS, xs, 31)
    for n in range(1, 30):
        lhs = xs * P[n]
        rhs = tab.gamma[n + 1] * P[n + 1] + tab.gamma[n] * P[n - 1]
        assert np.max(np.abs(lhs - rhs)) < 1e-9
    assert math.isclose(psi(tab, GAUSS, 10, 3, 0.4), P[3][np.argmin(np.abs(xs - 0.4))], rel_tol=1e-12)


def test_cd_kernel_properties():
    V, N = Potential.quartic(-1.0), 8
    tab = recurrence_from_weight(V, N, N + 2)
    rng = np.random.default_rng(0)
    x, y = rng.uniform(-2, 2, 50), rng.uniform(-2, 2, 50)
    assert np.max(np.abs(cd_kernel(tab, V, N, x, y) - kernel_sum(tab, V, N, x, y))) < 1e-9
    s, w = np.polynomial.legendre.leggauss(300)
    s, w = 3 * s, 3 * w
    assert abs(np.sum(w * cd_kernel(tab, V, N, s, s)) - N) < 1e-6
    K = cd_kernel(tab, V, N, 0.3, s) * cd_kernel(tab, V, N, s, -0.7)
    assert abs(np.sum(w * K) - cd_kernel(tab, V, N, 0.3, -0.7)) < 1e-6


def test_correlation_functions_n2():
    tab = RecurrenceTable.gaussian(2, 3)
    assert correlation_function(tab, GAUSS, 2, [0.4]) >= 0
    assert abs(correlation_function(tab, GAUSS, 2, [0.4, 0.4])) < 1e-12
    for x, y in [(0.1, -0.6), (0.8, 0.2)]:
        ref = 8 / math.pi * (x - y) ** 2 * math.exp(-2 * (x * x + y * y))
        assert abs(correlation_function(tab, GAUSS, 2, [x, y]) - ref) < 1e-6
    one = integrate.quad(lambda x: correlation_function(tab, GAUSS, 2, [x]), -6, 6)[0]
    assert abs(one - 2) < 1e-8


def test_dv_derivatives_gauss():
    N, n = 10.0, 4
    dlnh, _, dbeta = dv_derivatives(GAUSS, N, 2, n)
    assert math.isclose(dlnh / N, -(2 * n + 1) / (2 * N), rel_tol=1e-10)
    assert abs(dbeta) < 1e-10
