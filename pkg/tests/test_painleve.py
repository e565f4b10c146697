import math

import numpy as np
import pytest

from rmtlab.errors import YOutOfGrid
from rmtlab.kernels import airy
from rmtlab.painleve import (
    double_scaling_R,
    hastings_mcleod,
    scaling_variable,
    string_residual_ansatz,
    tracy_widom_cdf,
)


def test_hastings_mcleod_examples(hm_solution):
    sol = hm_solution
    assert sol.residual < 1e-8
    assert abs(sol(5.0) - airy(5.0)[0]) / airy(5.0)[0] < 1e-4
    assert abs(sol(-10.0) / math.sqrt(5) - 1) < 0.01
    assert np.all(sol.u > 0)
    right = sol.u[sol.grid > 0]
    assert np.all(np.diff(right) < 0)


def test_out_of_grid(hm_solution):
    with pytest.raises(YOutOfGrid):
        hm_solution(20.0)


def test_rejects_short_grid():
    with pytest.raises(ValueError):
        hastings_mcleod(y_min=-3.0)


def test_tracy_widom_limits_and_monotone(hm_solution):
    x = np.linspace(-5, 4, 46)
    F = tracy_widom_cdf(hm_solution, x)
    assert np.all(np.diff(F) > 0)
    assert tracy_widom_cdf(hm_solution, 12.0) > 1 - 1e-12
    assert abs(tracy_widom_cdf(hm_solution, -2.0) - 0.4132241425) < 1e-8


def test_ansatz_one_cut_side(hm_solution):
    t, N = -1.0, 1e4
    n = int(round(N * (0.25 + 7.5 * (t * t / 2) ** (1 / 3) * N ** (-2 / 3))))
    lam = n / N
    R = (-t + math.sqrt(t * t + 12 * lam)) / 6
    assert abs(double_scaling_R(t, N, n, hm_solution) - R) < 5e-3
    assert scaling_variable(t, N, n) == pytest.approx(7.5, abs=0.05)


def test_ansatz_residual_is_small(hm_solution):
    for N in (1e3, 1e4):
        assert abs(string_residual_ansatz(-1.0, N, int(N / 4), hm_solution)) < 5.0 / N


def test_ansatz_requires_negative_t(hm_solution):
    with pytest.raises(ValueError):
        double_scaling_R(0.5, 100, 10, hm_solution)
