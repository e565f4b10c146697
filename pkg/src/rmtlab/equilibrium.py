"""Equilibrium measures of polynomial external fields.

The density on the support J = [a_1, b_1] u ... u [a_q, b_q] is

    p_V(x) = s_j h(x) sqrt(|R(x)|) / (2 pi),   x in [a_j, b_j],

with R(x) = prod (x - a_k)(x - b_k) and s_j = (-1)**(q - j).  The sign s_j is
the boundary value of R^{1/2} on the upper side of the j-th cut divided by
i sqrt|R|; with it the density is nonnegative for every genuine equilibrium
measure, and a negative value signals a wrong number of cuts.

Integrals against the measure are done per interval in the angle variable
x = m + r cos(theta), which absorbs the square-root edges.  The logarithmic
potential uses the exact cosine expansion of log|x - cos(theta)|, so it is
accurate to rounding at every real x, endpoints included.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial import chebyshev as C
from scipy.fft import dct

from .errors import BranchCut, NonConvergence, WrongCutCount
from .potential import Potential

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class SupportIntervals:
    endpoints: tuple

    def __init__(self, endpoints: Sequence[float]):
        e = tuple(float(v) for v in endpoints)
        if len(e) == 0 or len(e) % 2:
            raise ValueError("need an even, nonzero number of endpoints")
        if any(e[i] >= e[i + 1] for i in range(len(e) - 1)):
            raise ValueError(f"endpoints must be strictly increasing: {e}")
        object.__setattr__(self, "endpoints", e)

    @property
    def q(self) -> int:
        return len(self.endpoints) // 2

    @property
    def intervals(self):
        e = self.endpoints
        return [(e[2 * j], e[2 * j + 1]) for j in range(self.q)]

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        inside = np.zeros(x.shape, dtype=bool)
        for a, b in self.intervals:
            inside |= (x >= a) & (x <= b)
        return inside

    def signs(self) -> list:
        q = self.q
        return [(-1.0) ** (q - 1 - j) for j in range(q)]


# ---------------------------------------------------------------------------
# algebra at infinity


def _inv_sqrt_series(endpoints, order: int) -> np.ndarray:
    """Coefficients f_k of prod_e (1 - e w)^(-1/2) = sum f_k w^k."""
    e = np.asarray(endpoints, dtype=float)
    g = np.zeros(order + 1)
    for k in range(1, order + 1):
        g[k] = 0.5 * np.sum(e**k) / k
    f = np.zeros(order + 1)
    f[0] = 1.0
    for n in range(1, order + 1):
        f[n] = sum(k * g[k] * f[n - k] for k in range(1, n + 1)) / n
    return f


def _laurent_vprime_over_sqrtR(V: Potential, endpoints, lowest: int) -> dict:
    """Laurent coefficients of V'(z) R(z)^{-1/2} at infinity, powers >= lowest."""
    q = len(endpoints) // 2
    d = V.derivative().coef
    top = len(d) - 1 - q
    order = top - lowest
    f = _inv_sqrt_series(endpoints, max(order, 0))
    out = {}
    for power in range(lowest, top + 1):
        s = 0.0
        # z^(m - q - k) = z^power
        for m, dm in enumerate(d):
            k = m - q - power
            if 0 <= k <= order:
                s += dm * f[k]
        out[power] = s
    return out


def h_from_endpoints(V: Potential, support) -> np.ndarray:
    """Polynomial part of V'(x)/R^{1/2}(x) at infinity (ascending coefficients)."""
    if not isinstance(support, SupportIntervals):
        support = SupportIntervals(support)
    q = support.q
    deg = V.degree - 1 - q
    if deg < 0:
        raise ValueError("too many cuts for the degree of V")
    lc = _laurent_vprime_over_sqrtR(V, support.endpoints, 0)
    return np.array([lc[k] for k in range(deg + 1)])


def _sqrt_R(endpoints, z):
    """Branch of R^{1/2} with cuts on J, ~ z^q at infinity."""
    z = np.asarray(z, dtype=complex)
    out = np.ones_like(z)
    for e in endpoints:
        out = out * np.sqrt(z - e)
    return out


def _abs_sqrt_R(endpoints, x):
    x = np.asarray(x, dtype=float)
    out = np.ones_like(x)
    for e in endpoints:
        out = out * np.sqrt(np.abs(x - e))
    return out


# ---------------------------------------------------------------------------
# measures


@dataclass(frozen=True, eq=False)
class Measure:
    """Density s_j h(x) sqrt|R(x)| / (2 pi) on each support interval."""

    support: SupportIntervals
    h_coeffs: np.ndarray
    _cheb: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def h(self) -> Polynomial:
        return Polynomial(self.h_coeffs)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        hv = self.h(x)
        root = _abs_sqrt_R(self.support.endpoints, x)
        for s, (a, b) in zip(self.support.signs(), self.support.intervals):
            inside = (x >= a) & (x <= b)
            out = np.where(inside, s * hv * root / _TWO_PI, out)
        return out if out.ndim else out[()]

    # per-interval angle representation

    def _factor(self, j: int, y):
        """Smooth part g_j(y) with density dy = g_j(y) sin^2(theta) dtheta."""
        a, b = self.support.intervals[j]
        r = 0.5 * (b - a)
        s = self.support.signs()[j]
        others = [e for k, e in enumerate(self.support.endpoints) if k // 2 != j]
        return s * self.h(y) * _abs_sqrt_R(others, y) * r * r / _TWO_PI

    def angle_series(self, j: int) -> np.ndarray:
        """Chebyshev (= cosine) coefficients of the theta-density on interval j."""
        if j in self._cheb:
            return self._cheb[j]
        a, b = self.support.intervals[j]
        m, r = 0.5 * (a + b), 0.5 * (b - a)
        exact = self.support.q == 1
        n = len(self.h_coeffs) + 1 if exact else 64
        while True:
            nodes = np.cos(np.pi * (np.arange(n) + 0.5) / n)
            vals = self._factor(j, m + r * nodes)
            coef = dct(vals, type=2) / n
            coef[0] *= 0.5
            if exact:
                break
            tail = np.max(np.abs(coef[-4:]))
            if tail < 1e-15 * max(np.max(np.abs(coef)), 1e-300) or n >= 2**16:
                break
            n *= 2
        series = C.chebmul(coef, [0.5, 0.0, -0.5])
        self._cheb[j] = series
        return series

    def _angle_nodes(self, j: int, n: int):
        """Trapezoid nodes in theta (spectral for even periodic integrands)."""
        a, b = self.support.intervals[j]
        m, r = 0.5 * (a + b), 0.5 * (b - a)
        theta = np.pi * np.arange(n + 1) / n
        w = np.full(n + 1, np.pi / n)
        w[0] = w[-1] = 0.5 * np.pi / n
        y = m + r * np.cos(theta)
        dens = self._factor(j, y) * np.sin(theta) ** 2
        return y, w * dens

    def quadrature(self, n: int = 256):
        """Nodes and weights that integrate smooth f against the measure."""
        ys, ws = [], []
        for j in range(self.support.q):
            y, w = self._angle_nodes(j, n)
            ys.append(y)
            ws.append(w)
        return np.concatenate(ys), np.concatenate(ws)

    def integrate(self, f, n: int = 256):
        y, w = self.quadrature(n)
        return np.sum(w * f(y))

    def mass(self) -> float:
        return float(sum(np.pi * self.angle_series(j)[0] for j in range(self.support.q)))

    def moments(self, kmax: int, n: int = 256) -> np.ndarray:
        y, w = self.quadrature(n)
        return np.array([np.sum(w * y**k) for k in range(kmax + 1)])

    def log_potential(self, x):
        """U(x) = int log|x - y| dnu(y) for real x."""
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1)
        total = np.zeros_like(flat)
        for j, (a, b) in enumerate(self.support.intervals):
            beta = self.angle_series(j)
            m, r = 0.5 * (a + b), 0.5 * (b - a)
            xt = (flat - m) / r
            k = np.arange(1, len(beta))
            inside = np.abs(xt) <= 1.0
            acc = np.empty_like(flat)
            # |xt| <= 1, xt = cos(phi)
            phi = np.arccos(np.clip(xt[inside], -1.0, 1.0))
            acc[inside] = beta[0] * (-math.pi * math.log(2.0)) - math.pi * (
                np.cos(np.outer(phi, k)) / k
            ) @ beta[1:]
            out = ~inside
            ax = np.abs(xt[out])
            rho = ax + np.sqrt(ax * ax - 1.0)
            sgn = np.sign(xt[out])
            powers = (sgn[:, None] / rho[:, None]) ** k
            acc[out] = beta[0] * math.pi * np.log(rho / 2.0) - math.pi * (powers / k) @ beta[1:]
            total += acc + beta[0] * math.pi * math.log(r)
        out = total.reshape(x.shape)
        return out if out.ndim else out[()]

    def g_function(self, z):
        """g(z) = int log(z - x) dnu(x), principal branch, z off (-inf, b_q]."""
        z = np.asarray(z, dtype=complex)
        flat = z.reshape(-1)
        bq = self.support.endpoints[-1]
        on_cut = (flat.imag == 0.0) & (flat.real <= bq)
        if np.any(on_cut):
            raise BranchCut(f"g is not defined on (-inf, {bq}]")
        total = np.zeros_like(flat)
        for j, (a, b) in enumerate(self.support.intervals):
            beta = self.angle_series(j)
            m, r = 0.5 * (a + b), 0.5 * (b - a)
            xt = (flat - m) / r
            rho = xt + np.sqrt(xt - 1.0) * np.sqrt(xt + 1.0)
            k = np.arange(1, len(beta))
            series0 = np.log(rho / 2.0) + 2.0 * np.log(1.0 - 1.0 / rho)
            offset = np.round(((np.log(xt - 1.0) - series0) / (2j * math.pi)).real)
            acc = beta[0] * math.pi * (np.log(rho / 2.0) + 2j * math.pi * offset)
            acc = acc - math.pi * ((rho[:, None] ** (-k)) / k) @ beta[1:]
            total += acc + beta[0] * math.pi * math.log(r)
        out = total.reshape(z.shape)
        return out if out.ndim else out[()]

    def resolvent_quadrature(self, z, tol: float = 1e-13):
        """omega(z) = int dnu(x)/(z - x) by angle-trapezoid quadrature."""
        z = np.asarray(z, dtype=complex)
        n = 64
        prev = None
        while True:
            y, w = self.quadrature(n)
            val = (w / (z.reshape(-1)[:, None] - y)).sum(axis=1)
            if prev is not None and np.max(np.abs(val - prev)) < tol:
                break
            if n > 2**16:
                raise NonConvergence("resolvent quadrature did not converge")
            prev = val
            n *= 2
        out = val.reshape(z.shape)
        return out if out.ndim else out[()]


@dataclass(frozen=True, eq=False)
class EquilibriumMeasure(Measure):
    lagrange_l: float = 0.0
    potential: Potential = None

    def resolvent(self, z):
        """Algebraic form V'(z)/2 - h(z) R^{1/2}(z)/2."""
        z = np.asarray(z, dtype=complex)
        vp = self.potential.derivative()(z)
        out = 0.5 * vp - 0.5 * self.h(z) * _sqrt_R(self.support.endpoints, z)
        return out if out.ndim else out[()]

    def effective_potential(self, x):
        """2 int log|x - y| dnu(y) - V(x) - l; zero on J, <= 0 off J."""
        x = np.asarray(x, dtype=float)
        return 2.0 * self.log_potential(x) - self.potential(x) - self.lagrange_l


def _with_lagrange(V: Potential, support: SupportIntervals, h) -> EquilibriumMeasure:
    probe = Measure(support, np.asarray(h, dtype=float))
    xs = []
    for a, b in support.intervals:
        xs.extend([0.5 * (a + b), a + 0.25 * (b - a), b - 0.25 * (b - a)])
    xs = np.array(xs)
    l_vals = 2.0 * probe.log_potential(xs) - V(xs)
    return EquilibriumMeasure(support, np.asarray(h, dtype=float), lagrange_l=float(np.mean(l_vals)), potential=V)


def measure_from_endpoints(V: Potential, support) -> EquilibriumMeasure:
    if not isinstance(support, SupportIntervals):
        support = SupportIntervals(support)
    return _with_lagrange(V, support, h_from_endpoints(V, support))


# ---------------------------------------------------------------------------
# endpoint equations


def _gap_integral(V: Potential, endpoints, h: Polynomial, j: int, n: int = 96) -> float:
    """int_{b_j}^{a_{j+1}} h(x) sqrt|R(x)| dx via x = m + r cos(theta)."""
    b, a = endpoints[2 * j + 1], endpoints[2 * j + 2]
    m, r = 0.5 * (a + b), 0.5 * (a - b)
    t, w = np.polynomial.legendre.leggauss(n)
    theta = 0.5 * math.pi * (t + 1.0)
    w = 0.5 * math.pi * w
    x = m + r * np.cos(theta)
    others = [e for k, e in enumerate(endpoints) if k not in (2 * j + 1, 2 * j + 2)]
    integrand = h(x) * _abs_sqrt_R(others, x) * (r * np.sin(theta)) ** 2
    return float(np.sum(w * integrand))


def endpoint_residuals(V: Potential, endpoints) -> np.ndarray:
    """The 2q equations: q+1 moment conditions at infinity, q-1 gap conditions."""
    endpoints = list(endpoints)
    q = len(endpoints) // 2
    lc = _laurent_vprime_over_sqrtR(V, endpoints, -1 - q)
    res = [lc[-1 - j] - (2.0 if j == q else 0.0) for j in range(q + 1)]
    if q > 1:
        h = Polynomial([lc[k] for k in range(V.degree - q)])
        for j in range(q - 1):
            res.append(_gap_integral(V, endpoints, h, j))
    return np.array(res)


def default_guesses(V: Potential, q: int) -> list:
    """Starting supports tried in turn when no guess is supplied."""
    scale = (1.0 / V.coeffs[-1]) ** (1.0 / V.degree)
    A = math.sqrt(2.0) * scale
    if q == 1:
        return [SupportIntervals([-f * A, f * A]) for f in (1.0, 1.5, 2.5, 0.6)]
    if q == 2:
        out = []
        for f in (1.2, 1.6, 2.2):
            for inner in (0.3, 0.1, 0.5, 0.03):
                B = inner * f * A
                out.append(SupportIntervals([-f * A, -B, B, f * A]))
        return out
    return [SupportIntervals(np.linspace(-f * A, f * A, 2 * q)) for f in (1.5, 2.0, 3.0)]


def _to_gap_vars(e: np.ndarray) -> np.ndarray:
    """(a_1, c_1, w_1, ..., b_q): each gap by its centre and squared half-width."""
    u = [e[0]]
    for j in range(len(e) // 2 - 1):
        b, a = e[2 * j + 1], e[2 * j + 2]
        u.extend([0.5 * (a + b), (0.5 * (a - b)) ** 2])
    u.append(e[-1])
    return np.array(u)


def _from_gap_vars(u: np.ndarray) -> np.ndarray:
    e = [u[0]]
    for j in range((len(u) - 2) // 2):
        c, w = u[1 + 2 * j], u[2 + 2 * j]
        d = math.sqrt(max(w, 0.0))
        e.extend([c - d, c + d])
    e.append(u[-1])
    return np.array(e)


def _admissible(e0: np.ndarray, u: np.ndarray) -> bool:
    ws = u[2:-1:2]
    if np.any(ws <= 0):
        return False
    e = _from_gap_vars(u)
    if not np.all(np.diff(e) > 0):
        return False
    # a step may at most halve any interval
    return bool(np.all(np.diff(e)[0::2] >= 0.5 * np.diff(e0)[0::2]))


def _scaled_residuals(V: Potential, u: np.ndarray) -> np.ndarray:
    """Endpoint residuals with each gap integral divided by its w_j.

    The gap integral vanishes like w_j as the gap closes; dividing keeps the
    equation well conditioned near a closing gap.
    """
    e = _from_gap_vars(u)
    res = endpoint_residuals(V, e)
    q = len(e) // 2
    for j in range(q - 1):
        res[q + 1 + j] /= u[2 + 2 * j]
    return res


def solve_endpoints(
    V: Potential,
    q: int,
    guess=None,
    tol: float = 1e-12,
    max_iter: int = 60,
    check_density: bool = True,
) -> SupportIntervals:
    """Newton iteration for the support endpoints of the equilibrium measure.

    Raises NonConvergence if the iteration stalls and WrongCutCount if it
    converges to endpoints whose density is negative somewhere.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    if guess is None:
        last = None
        for g in default_guesses(V, q):
            try:
                return solve_endpoints(V, q, g, tol, max_iter, check_density)
            except NonConvergence as exc:
                last = exc
        raise last
    if not isinstance(guess, SupportIntervals):
        guess = SupportIntervals(guess)
    u = _to_gap_vars(np.array(guess.endpoints))
    span = max(1.0, float(np.max(np.abs(guess.endpoints))))
    F = _scaled_residuals(V, u)
    for _ in range(max_iter):
        if np.max(np.abs(F)) < tol:
            break
        scale = max(1.0, np.max(np.abs(u)))
        step = 1e-7 * scale
        J = np.empty((2 * q, 2 * q))
        for k in range(2 * q):
            up, um = u.copy(), u.copy()
            up[k] += step
            um[k] -= step
            J[:, k] = (_scaled_residuals(V, up) - _scaled_residuals(V, um)) / (2 * step)
        try:
            delta = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError as exc:
            raise NonConvergence(f"singular Jacobian at endpoints {_from_gap_vars(u)}") from exc
        if not np.all(np.isfinite(delta)):
            raise NonConvergence(f"singular Jacobian at endpoints {_from_gap_vars(u)}")
        # projected Newton: a squared gap width may shrink at most fourfold
        e0 = _from_gap_vars(u)
        lam = 1.0
        while lam > 1e-6:
            trial = u + lam * delta
            trial[2:-1:2] = np.maximum(trial[2:-1:2], 0.25 * u[2:-1:2])
            if _admissible(e0, trial):
                Ft = _scaled_residuals(V, trial)
                if np.all(np.isfinite(Ft)):
                    break
            lam *= 0.5
        else:
            raise NonConvergence(f"line search failed at endpoints {e0}")
        u, F = trial, Ft
        if np.max(np.abs(u[[0, -1]])) > 50.0 * span:
            raise NonConvergence(f"endpoint Newton diverged from {guess.endpoints}")
    else:
        if np.max(np.abs(F)) >= tol:
            raise NonConvergence(
                f"endpoint Newton hit the iteration cap, residual {np.max(np.abs(F)):.3e}"
            )
    e = _from_gap_vars(u)
    support = SupportIntervals(e)
    if check_density:
        _check_sign(V, support)
    return support


def _check_sign(V: Potential, support: SupportIntervals, rel_tol: float = 1e-9):
    h = Polynomial(h_from_endpoints(V, support))
    worst, scale = 0.0, 0.0
    for s, (a, b) in zip(support.signs(), support.intervals):
        x = a + (b - a) * 0.5 * (1 - np.cos(np.linspace(0, math.pi, 401)))
        vals = s * h(x)
        worst = min(worst, float(np.min(vals)))
        scale = max(scale, float(np.max(np.abs(vals))))
    if worst < -rel_tol * max(scale, 1e-300):
        raise WrongCutCount(
            f"density negative on the support (min signed h = {worst:.3e}); "
            f"try a different number of cuts",
            endpoints=support.endpoints,
            min_density=worst,
        )


def equilibrium_measure(V: Potential, q: int = 1, guess=None) -> EquilibriumMeasure:
    support = solve_endpoints(V, q, guess)
    return measure_from_endpoints(V, support)


def density(m: Measure, x):
    return m.density(x)


# ---------------------------------------------------------------------------
# closed forms for the even quartic t x^2/2 + x^4/4


def quartic_closed_form(t: float) -> EquilibriumMeasure:
    V = Potential.quartic(t)
    if t >= -2.0:
        a = math.sqrt((-2.0 * t + 2.0 * math.sqrt(t * t + 12.0)) / 3.0)
        c = (t + math.sqrt(t * t / 4.0 + 3.0)) / 3.0
        support = SupportIntervals([-a, a])
        h = np.array([2.0 * c, 0.0, 1.0])
    else:
        a = math.sqrt(2.0 - t)
        b = math.sqrt(-2.0 - t)
        support = SupportIntervals([-a, -b, b, a])
        h = np.array([0.0, 1.0])
    return _with_lagrange(V, support, h)


# ---------------------------------------------------------------------------
# energy and diagnostics


def energy(V: Potential, m: Measure, n: int = 256) -> float:
    """I_V(nu) = -int int log|x - y| dnu dnu + int V dnu."""
    y, w = m.quadrature(n)
    return float(np.sum(w * (V(y) - m.log_potential(y))))


def g_function(m: Measure, z):
    return m.g_function(z)


def resolvent(m: EquilibriumMeasure, z, method: str = "algebraic"):
    if method == "algebraic":
        return m.resolvent(z)
    if method == "quadrature":
        return m.resolvent_quadrature(z)
    raise ValueError(f"unknown method {method!r}")


def density_from_q(V: Potential, m: Measure, x, n: int = 256):
    """(1/pi) sqrt(q(x)), q = -(V'/2)^2 + int (V'(x) - V'(y))/(x - y) dnu(y)."""
    x = np.asarray(x, dtype=float)
    d = V.derivative().coef
    mom = m.moments(len(d), n)
    integral = np.zeros_like(x)
    for deg, dm in enumerate(d):
        for i in range(deg):
            integral = integral + dm * x**i * mom[deg - 1 - i]
    qx = -(0.25) * V.derivative()(x) ** 2 + integral
    return np.sqrt(np.clip(qx, 0.0, None)) / math.pi


@dataclass
class VariationalReport:
    on_support_deviation: float
    off_support_margin: float
    min_abs_h: float
    regular: bool
    tolerance: float


def variational_check(
    V: Potential, m: EquilibriumMeasure, grid, tol: float = 1e-6
) -> VariationalReport:
    grid = np.asarray(grid, dtype=float)
    inside = m.support.contains(grid)
    probe = [grid[inside]]
    for a, b in m.support.intervals:
        probe.append(a + (b - a) * 0.5 * (1 - np.cos(np.linspace(0, math.pi, 65))))
    probe = np.concatenate(probe)
    eff = 2.0 * m.log_potential(probe) - V(probe) - m.lagrange_l
    deviation = float(np.max(np.abs(eff)))

    width = m.support.endpoints[-1] - m.support.endpoints[0]
    outside = grid[~inside]
    dist = np.min(np.abs(outside[:, None] - np.array(m.support.endpoints)[None, :]), axis=1) if outside.size else np.array([])
    outside = outside[dist > 1e-8 * width]
    if outside.size:
        margin = float(np.min(m.lagrange_l - (2.0 * m.log_potential(outside) - V(outside))))
    else:
        margin = math.inf

    h = m.h
    min_h = math.inf
    for a, b in m.support.intervals:
        xs = np.linspace(a, b, 2001)
        min_h = min(min_h, float(np.min(np.abs(h(xs)))))
    for root in h.roots():
        if abs(root.imag) < 1e-9 and m.support.contains(root.real):
            min_h = min(min_h, float(abs(h(root.real))))
    hscale = float(np.max(np.abs(m.h_coeffs))) or 1.0
    regular = deviation < tol and margin > 0.0 and min_h > 1e-8 * hscale
    return VariationalReport(deviation, margin, min_h, regular, tol)
