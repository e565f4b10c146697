"""Partition functions, free energies and the quartic third-order transition."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre
from scipy.special import gammaln

from .equilibrium import energy, quartic_closed_form, solve_endpoints
from .errors import IntegrandTail, NonConvergence
from .orthopoly import recurrence_from_weight
from .potential import Potential

GAUSS_ENERGY = 0.75 + 0.5 * math.log(2.0)  # I_V of the equilibrium measure for V = z^2


@dataclass(frozen=True)
class FreeEnergyReport:
    N: int
    lnZ: float
    F_N: float
    F_N_minus_gauss: float
    method: str
    residual: float = 0.0


def partition_ln(V: Potential, N: int, table=None) -> float:
    """ln Z_N = ln N! + sum_{n<N} ln h_n for the weight exp(-N V)."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if table is None:
        table = recurrence_from_weight(V, N, N)
    return float(gammaln(N + 1) + np.sum(table.log_h[:N]))


def gauss_ln_z(N: int) -> float:
    """ln of (2 pi)^{N/2} (2N)^{-N^2/2} prod_{n=1}^N n!."""
    n = np.arange(1, N + 1)
    return float(0.5 * N * math.log(2 * math.pi) - 0.5 * N * N * math.log(2.0 * N) + np.sum(gammaln(n + 1)))


def gauss_free_energy(N: int) -> float:
    if N < 1:
        raise ValueError("N must be >= 1")
    return -gauss_ln_z(N) / N**2


def _v2_bracket(table, N: int) -> float:
    g2 = table.gamma_sq
    b = table.beta
    return float(g2[N] * (g2[N - 1] + g2[N + 1] + b[N] ** 2 + 2 * b[N] * b[N - 1] + b[N - 1] ** 2))


def d2_identity_rhs(V: Potential, N: int, table=None) -> float:
    """gamma_N^2 (gamma_{N-1}^2 + gamma_{N+1}^2 + beta_N^2 + 2 beta_N beta_{N-1} + beta_{N-1}^2)."""
    if table is None:
        table = recurrence_from_weight(V, N, N + 1)
    return _v2_bracket(table, N)


def d2_identity_residual(V: Potential, N: int, eps: float = 1e-4) -> float:
    """Relative gap between N^-2 d^2 ln Z_N / dv_2^2 by central differences and its local form."""
    step = eps * (abs(V.coeffs[1]) + 1.0)
    lp = partition_ln(V.shifted(2, step), N)
    l0 = partition_ln(V, N)
    lm = partition_ln(V.shifted(2, -step), N)
    lhs = (lp - 2.0 * l0 + lm) / (step * step) / N**2
    rhs = d2_identity_rhs(V, N)
    return abs(lhs - rhs) / abs(rhs)


# ---------------------------------------------------------------------------
# integrals over the Gaussian deformation
#
# With sigma = 1/tau = s^2 the tail tau -> infinity maps to s -> 0 and every
# coefficient of the deformed potential becomes a polynomial in s.


def _deformed(V: Potential, s: float) -> Potential:
    sig = s * s
    c = [v * s**j for j, v in enumerate(V.coeffs, start=1)]
    c[1] += 1.0 - sig
    return Potential(c)


def _tau_integral(f, upper: float, nodes: int, tol: float, max_nodes: int = 512):
    """Gauss-Legendre on [0, upper] in s, doubling until successive values agree."""
    prev = None
    n = nodes
    while True:
        x, w = legendre.leggauss(n)
        s = 0.5 * upper * (x + 1.0)
        val = 0.5 * upper * float(np.sum(w * np.array([f(si) for si in s])))
        if prev is not None and abs(val - prev) < tol:
            return val
        if 2 * n > max_nodes:
            raise NonConvergence(f"deformation integral did not converge ({abs(val - prev):.2e})")
        prev = val
        n *= 2


def free_energy_via_deformation(
    V: Potential, N: int, t: float = 1.0, nodes: int = 16, tol: float = 1e-10
) -> float:
    """F_N of the deformed potential tau_t V by integrating the local v_2 identity.

    F_N(t) = F_N^Gauss + int_t^inf (t - tau)/tau^2 {bracket(tau) - 1/2} dtau.
    """
    if t < 1:
        raise ValueError("t must be >= 1")

    def integrand(s):
        Vs = _deformed(V, s)
        table = recurrence_from_weight(Vs, N, N + 1)
        return 2.0 * (t * s * s - 1.0) / s * (_v2_bracket(table, N) - 0.5)

    tail = abs(integrand(1e-4))
    if not np.isfinite(tail) or tail > 1e-2:
        raise IntegrandTail(f"integrand has not decayed near tau = 1e8 (|f| = {tail:.2e})")
    return gauss_free_energy(N) + _tau_integral(integrand, 1.0 / math.sqrt(t), nodes, tol)


def free_energy(V: Potential, N: int, method: str = "product") -> FreeEnergyReport:
    if method == "product":
        lnZ = partition_ln(V, N)
        F = -lnZ / N**2
    elif method == "integral":
        F = free_energy_via_deformation(V, N)
        lnZ = -F * N**2
    else:
        raise ValueError(f"unknown method {method!r}")
    return FreeEnergyReport(N, lnZ, F, F - gauss_free_energy(N), method)


def leading_free_energy(V: Potential, nodes: int = 16, tol: float = 1e-11) -> float:
    """F = int_1^inf (1 - tau)/tau^2 [2 gamma^4 + 4 gamma^2 beta^2 - 1/2] dtau.

    gamma = (b - a)/4 and beta = (a + b)/2 from the one-cut support of tau V.
    """
    cache = {}

    def support(s):
        if s not in cache:
            Vs = _deformed(V, s)
            # continuation from the Gaussian end: [-sqrt 2, sqrt 2] is exact at s = 0
            guess = None
            if cache:
                near = min(cache, key=lambda k: abs(k - s))
                guess = cache[near]
            try:
                cache[s] = solve_endpoints(Vs, 1, guess).endpoints
            except NonConvergence:
                cache[s] = solve_endpoints(Vs, 1).endpoints
        return cache[s]

    def integrand(s):
        a, b = support(s)
        g = (b - a) / 4.0
        beta = (a + b) / 2.0
        return 2.0 * (s * s - 1.0) / s * (2 * g**4 + 4 * g * g * beta * beta - 0.5)

    return _tau_integral(integrand, 1.0, nodes, tol)


# ---------------------------------------------------------------------------
# third-order transition of the even quartic t z^2/2 + z^4/4


def quartic_energy(t: float) -> float:
    """I_V of the equilibrium measure of t z^2/2 + z^4/4 from the closed forms."""
    return energy(Potential.quartic(t), quartic_closed_form(t))


# one-sided stencils at the base point, second order in the spacing
_ONE_SIDED = {
    0: np.array([1.0, 0, 0, 0, 0]),
    1: np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0,
    2: np.array([35.0, -104.0, 114.0, -56.0, 11.0]) / 12.0,
    3: np.array([-5.0, 18.0, -24.0, 14.0, -3.0]) / 2.0,
}


def one_sided_derivatives(f, t0: float, h: float, side: int) -> np.ndarray:
    """Derivatives 0..3 at t0 from f(t0 + side k h), k = 0..4."""
    vals = np.array([f(t0 + side * k * h) for k in range(5)])
    return np.array([side**d * float(_ONE_SIDED[d] @ vals) / h**d for d in range(4)])


@dataclass(frozen=True)
class TransitionReport:
    t_c: float
    spacing: float
    left: np.ndarray  # F, F', F'', F''' from t < t_c
    right: np.ndarray

    @property
    def gaps(self) -> np.ndarray:
        return self.right - self.left


def phase_transition_probe(t_c: float = -2.0, spacing: float = 1e-2, f=quartic_energy) -> TransitionReport:
    left = one_sided_derivatives(f, t_c, spacing, -1)
    right = one_sided_derivatives(f, t_c, spacing, +1)
    return TransitionReport(t_c, spacing, left, right)


def energy_table(t_grid, f=quartic_energy) -> np.ndarray:
    """Rows (t, F, F', F'', F''') with central differences at spacing set by the grid."""
    t_grid = np.asarray(t_grid, dtype=float)
    F = np.array([f(t) for t in t_grid])
    h = float(t_grid[1] - t_grid[0])
    d1 = np.gradient(F, h)
    d2 = np.gradient(d1, h)
    d3 = np.gradient(d2, h)
    return np.column_stack([t_grid, F, d1, d2, d3])
