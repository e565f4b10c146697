"""Hastings-McLeod solution of Painleve II, Tracy-Widom distribution and the
double-scaling ansatz for the quartic recurrence coefficients."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre
from scipy.interpolate import BarycentricInterpolator

from .errors import NewtonDivergence, YOutOfGrid
from .kernels import airy


def _cheb_diff(n: int):
    """Chebyshev-Lobatto nodes on [-1, 1] (descending) and the first-derivative matrix."""
    k = np.arange(n + 1)
    x = np.cos(np.pi * k / n)
    c = np.ones(n + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** k
    X = np.tile(x, (n + 1, 1)).T
    dX = X - X.T
    D = np.outer(c, 1.0 / c) / (dX + np.eye(n + 1))
    D -= np.diag(D.sum(axis=1))
    return x, D


def left_asymptote(y):
    """sqrt(-y/2) (1 + 1/(8 y^3) - 73/(128 y^6)), the y -> -infinity expansion."""
    y = np.asarray(y, dtype=float)
    return np.sqrt(-y / 2.0) * (1.0 + 1.0 / (8.0 * y**3) - 73.0 / (128.0 * y**6))


@dataclass(frozen=True, eq=False)
class PainleveSolution:
    grid: np.ndarray
    u: np.ndarray
    w: np.ndarray
    v: np.ndarray
    residual: float
    _interp: dict = field(default_factory=dict, repr=False)

    @property
    def y_min(self) -> float:
        return float(self.grid[0])

    @property
    def y_max(self) -> float:
        return float(self.grid[-1])

    def _get(self, name):
        if name not in self._interp:
            # closed-form Chebyshev-Lobatto weights; scipy would otherwise shuffle nodes at random
            wi = (-1.0) ** np.arange(len(self.grid))
            wi[0] *= 0.5
            wi[-1] *= 0.5
            self._interp[name] = BarycentricInterpolator(self.grid, getattr(self, name), wi=wi)
        return self._interp[name]

    def _check(self, y):
        y = np.asarray(y, dtype=float)
        if np.any(y < self.y_min - 1e-12) or np.any(y > self.y_max + 1e-12):
            raise YOutOfGrid(f"y outside the solution grid [{self.y_min}, {self.y_max}]")
        return y

    def __call__(self, y):
        return self._get("u")(self._check(y))

    def derivative(self, y):
        return self._get("w")(self._check(y))

    def v_at(self, y):
        y = self._check(y)
        return y + 2.0 * self._get("u")(y) ** 2


def hastings_mcleod(
    y_min: float = -12.0, y_max: float = 8.0, nodes: int = 160, tol: float = 1e-10, max_iter: int = 60
) -> PainleveSolution:
    """Chebyshev collocation with damped Newton for u'' = y u + 2 u^3.

    Boundary values: Ai(y_max) on the right and the three-term algebraic
    expansion at y_min on the left.
    """
    if y_min > -6 or y_max < 5:
        raise ValueError("need y_min <= -6 and y_max >= 5")
    s, D = _cheb_diff(nodes)
    half = 0.5 * (y_max - y_min)
    y = (y_min + y_max) / 2.0 + half * s  # descending
    D1 = D / half
    D2 = D1 @ D1
    right = float(airy(y_max)[0])
    left = float(left_asymptote(y_min))

    # initial guess: logistic blend of the two asymptotic regimes
    blend = 1.0 / (1.0 + np.exp(-2.0 * y))
    ai = airy(np.maximum(y, -1.0))[0]
    u = blend * ai + (1.0 - blend) * np.sqrt(np.maximum(-y, 0.0) / 2.0 + 0.05)
    u[0], u[-1] = right, left

    def residual(u):
        r = D2 @ u - y * u - 2.0 * u**3
        r[0] = u[0] - right
        r[-1] = u[-1] - left
        return r

    r = residual(u)
    for _ in range(max_iter):
        norm = np.max(np.abs(r))
        if norm < tol:
            break
        J = D2 - np.diag(y + 6.0 * u**2)
        J[0, :] = 0.0
        J[-1, :] = 0.0
        J[0, 0] = J[-1, -1] = 1.0
        delta = np.linalg.solve(J, -r)
        lam = 1.0
        while lam > 1e-6:
            trial = u + lam * delta
            rt = residual(trial)
            if np.max(np.abs(rt)) < norm or np.max(np.abs(rt)) < tol:
                break
            lam *= 0.5
        else:
            if norm < 1e3 * tol:
                break  # rounding floor of the differentiation matrix
            raise NewtonDivergence("Painleve collocation Newton stalled; restart from a continuation in y_min")
        u, r = trial, rt
    else:
        if np.max(np.abs(r)) >= 1e3 * tol:
            raise NewtonDivergence(f"Painleve collocation did not converge ({np.max(np.abs(r)):.2e})")
    w = D1 @ u
    res = float(np.max(np.abs((D2 @ u - y * u - 2.0 * u**3)[1:-1])))
    # store ascending
    y, u, w = y[::-1], u[::-1], w[::-1]
    return PainleveSolution(y.copy(), u.copy(), w.copy(), y + 2.0 * u**2, res)


# ---------------------------------------------------------------------------
# Tracy-Widom


def _airy_tail(Y: float, x: float) -> float:
    """int_Y^inf (y - x) Ai(y)^2 dy in closed form."""
    a, ap = airy(Y)
    int_ai2 = ap * ap - Y * a * a
    int_yai2 = -(Y * Y * a * a - Y * ap * ap + a * ap) / 3.0
    return int_yai2 - x * int_ai2


def tracy_widom_cdf(sol: PainleveSolution, x, nodes: int = 200, margin: float = 0.0):
    """F_TW(x) = exp(-int_x^inf (y - x) u(y)^2 dy)."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    t, wt = legendre.leggauss(nodes)
    out = np.empty_like(xs)
    for i, xv in enumerate(xs):
        if xv < sol.y_min + margin:
            raise YOutOfGrid(f"x = {xv} below the solution grid")
        Y = sol.y_max
        if xv >= Y:
            out[i] = math.exp(-_airy_tail(xv, xv))
            continue
        yy = 0.5 * (Y - xv) * (t + 1.0) + xv
        integral = 0.5 * (Y - xv) * np.sum(wt * (yy - xv) * sol(yy) ** 2)
        out[i] = math.exp(-(integral + _airy_tail(Y, xv)))
    return out if np.ndim(x) else float(out[0])


def tracy_widom_pdf(sol: PainleveSolution, x, h: float = 1e-4):
    x = np.asarray(x, dtype=float)
    return (tracy_widom_cdf(sol, x + h) - tracy_widom_cdf(sol, x - h)) / (2.0 * h)


# ---------------------------------------------------------------------------
# double scaling


def scaling_constants(t: float):
    """(c0, c1, c2) of the double-scaling ansatz."""
    c0 = (t * t / 2.0) ** (1.0 / 3.0)
    c1 = (2.0 * abs(t)) ** (1.0 / 3.0)
    c2 = 0.5 * (1.0 / (2.0 * abs(t))) ** (1.0 / 3.0)
    return c0, c1, c2


def scaling_variable(t: float, N: float, n):
    c0, _, _ = scaling_constants(t)
    return (np.asarray(n, dtype=float) / N - t * t / 4.0) / (c0 * N ** (-2.0 / 3.0))


def double_scaling_R(t: float, N: float, n, sol: PainleveSolution, parity: int = 1):
    """-t/2 + N^{-1/3} (-1)^{n+parity} c1 u(y) + N^{-2/3} c2 v(y), t < 0.

    The default ``parity = 1`` puts odd n on the upper branch, which is where
    the recurrence coefficients of the weight sit (gamma_1^2 = <x^2> is large
    for a double well). ``parity = 0`` gives the opposite alternation.
    """
    if t >= 0:
        raise ValueError("the double-scaling ansatz needs t < 0")
    _, c1, c2 = scaling_constants(t)
    n = np.asarray(n)
    y = scaling_variable(t, N, n)
    sign = np.where((n + parity) % 2 == 0, 1.0, -1.0)
    out = -t / 2.0 + N ** (-1.0 / 3.0) * sign * c1 * sol(y) + N ** (-2.0 / 3.0) * c2 * sol.v_at(y)
    return out if np.ndim(out) else float(out)


def string_residual_ansatz(t: float, N: float, n: int, sol: PainleveSolution, parity: int = 1) -> float:
    """R_n (t + R_{n-1} + R_n + R_{n+1}) - n/N with R from the ansatz (g = 1)."""
    R = double_scaling_R(t, N, np.array([n - 1, n, n + 1]), sol, parity)
    return float(R[1] * (t + R.sum()) - n / N)
