"""Airy and Pearcey functions, universal kernels and Fredholm determinants."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial import legendre

from .errors import NonConvergence, QuadratureNonConvergence

AI0 = 1.0 / (3.0 ** (2.0 / 3.0) * math.gamma(2.0 / 3.0))
AIP0 = -1.0 / (3.0 ** (1.0 / 3.0) * math.gamma(1.0 / 3.0))

_SERIES_RADIUS = 6.0
_ASYMPTOTIC_NEG = -9.0
_SERIES_POS = 3.0


# ---------------------------------------------------------------------------
# Airy function


def _airy_maclaurin(z):
    """Ai = Ai(0) f + Ai'(0) g with f, g the even-type and odd-type solutions."""
    z = np.asarray(z)
    z3 = z**3
    tf, tg = np.ones_like(z), z.copy()  # a_{3k} z^{3k}, a_{3k+1} z^{3k+1}
    df, dg = z**2 / 2.0, np.ones_like(z)  # their derivatives, k = 1 and k = 0
    f, g, fp, gp = tf.copy(), tg.copy(), df.copy(), dg.copy()
    for k in range(1, 90):
        tf = tf * z3 / ((3 * k - 1) * (3 * k))
        tg = tg * z3 / ((3 * k) * (3 * k + 1))
        df = df * z3 / ((3 * k) * (3 * k + 2))
        dg = dg * z3 / ((3 * k - 2) * (3 * k))
        f, g, fp, gp = f + tf, g + tg, fp + df, gp + dg
        size = np.max(np.abs(tf) + np.abs(tg) + np.abs(df) + np.abs(dg)) if z.size else 0.0
        if size < 1e-18:
            break
    return AI0 * f + AIP0 * g, AI0 * fp + AIP0 * gp


def _u_coeffs(n: int = 40):
    u = [1.0]
    for k in range(1, n):
        u.append(u[-1] * (6 * k - 5) * (6 * k - 3) * (6 * k - 1) / ((2 * k - 1) * 216 * k))
    v = [1.0] + [-(6 * k + 1) / (6 * k - 1) * u[k] for k in range(1, n)]
    return np.array(u), np.array(v)


_U, _VV = _u_coeffs()


def _asym_sum(coef, zeta_inv, alternating: bool, parity=None):
    """sum of coef_k (+-1)^k zeta^{-k} truncated at the smallest term."""
    total = np.zeros_like(zeta_inv)
    term_prev = np.full(zeta_inv.shape, np.inf)
    active = np.ones(zeta_inv.shape, dtype=bool)
    for k in range(len(coef)):
        if parity is not None and k % 2 != parity:
            continue
        sign = (-1.0) ** k if alternating else 1.0
        if parity is not None:
            sign = (-1.0) ** (k // 2)
        term = sign * coef[k] * zeta_inv**k
        mag = np.abs(term)
        active = active & (mag < np.abs(term_prev))
        total = total + np.where(active, term, 0.0)
        term_prev = np.where(active, mag, term_prev)
    return total


def _airy_asym_pos(x):
    x = np.asarray(x)
    zeta = 2.0 / 3.0 * x**1.5
    zi = 1.0 / zeta
    su = _asym_sum(_U, zi, True)
    sv = _asym_sum(_VV, zi, True)
    e = np.exp(-zeta) / (2.0 * math.sqrt(math.pi))
    return e * su / x**0.25, -e * sv * x**0.25


def _airy_asym_neg(x):
    """x < 0 real."""
    r = -np.asarray(x, dtype=float)
    zeta = 2.0 / 3.0 * r**1.5
    zi = 1.0 / zeta
    ph = zeta - math.pi / 4.0
    c, s = np.cos(ph), np.sin(ph)
    u_even = _asym_sum(_U, zi, False, parity=0)
    u_odd = _asym_sum(_U, zi, False, parity=1)
    v_even = _asym_sum(_VV, zi, False, parity=0)
    v_odd = _asym_sum(_VV, zi, False, parity=1)
    ai = (c * u_even + s * u_odd) / (math.sqrt(math.pi) * r**0.25)
    aip = r**0.25 * (s * v_even - c * v_odd) / math.sqrt(math.pi)
    return ai, aip


def _taylor_step(x0, a0, a1, h, terms: int = 40):
    """Taylor expansion of y'' = x y about x0 evaluated at x0 + h."""
    h = np.asarray(h, dtype=float)
    coef = [a0, a1, 0.5 * x0 * a0]
    for k in range(1, terms):
        coef.append((x0 * coef[k] + coef[k - 1]) / ((k + 2) * (k + 1)))
    y = np.zeros_like(h)
    dy = np.zeros_like(h)
    for k in reversed(range(len(coef))):
        y = y * h + coef[k]
    for k in reversed(range(1, len(coef))):
        dy = dy * h + k * coef[k]
    return y, dy


def _anchor_chain(x_start, a, ap, x_stop, step):
    xs, vals = [x_start], [(a, ap)]
    x0 = x_start
    while (x_stop - x0) * np.sign(step) > 0:
        a, ap = _taylor_step(x0, a, ap, step)
        a, ap = float(a), float(ap)
        x0 += step
        xs.append(x0)
        vals.append((a, ap))
    return np.array(xs), np.array(vals)


@lru_cache(maxsize=1)
def _negative_anchors():
    """(x0, Ai, Ai') stepped from x = 0 down past -9 (oscillatory side, stable)."""
    return _anchor_chain(0.0, AI0, AIP0, _ASYMPTOTIC_NEG - 0.5, -0.25)


@lru_cache(maxsize=1)
def _positive_anchors():
    """(x0, Ai, Ai') stepped from the asymptotic value at x = 9 down to 2.5.

    Stepping towards smaller x follows the growing direction of Ai, so the
    recessive error component shrinks.
    """
    a, ap = _airy_asym_pos(np.array([9.0]))
    return _anchor_chain(9.0, float(a[0]), float(ap[0]), _SERIES_POS - 0.5, -0.25)


def _from_anchors(anchors, x):
    xs, vals = anchors
    idx = np.argmin(np.abs(x[:, None] - xs[None, :]), axis=1)
    ai = np.empty_like(x)
    aip = np.empty_like(x)
    for i in np.unique(idx):
        sel = idx == i
        ai[sel], aip[sel] = _taylor_step(xs[i], vals[i, 0], vals[i, 1], x[sel] - xs[i])
    return ai, aip


def airy(x):
    """(Ai(x), Ai'(x)); real or complex input.

    Real x: Maclaurin series on [-6, 3]; Taylor expansions about anchors on
    [-9, -6) and (3, 6], the anchors being reached by short Taylor steps from
    x = 0 and from the asymptotic value at x = 9; asymptotic expansions for
    x > 6 and x < -9.
    """
    x = np.asarray(x)
    if np.iscomplexobj(x):
        return _airy_complex(x)
    x = x.astype(float)
    flat = x.ravel()
    ai = np.empty_like(flat)
    aip = np.empty_like(flat)
    regions = [
        (flat > _SERIES_RADIUS, _airy_asym_pos),
        ((flat > _SERIES_POS) & (flat <= _SERIES_RADIUS), lambda v: _from_anchors(_positive_anchors(), v)),
        ((flat >= -_SERIES_RADIUS) & (flat <= _SERIES_POS), _airy_maclaurin),
        ((flat < -_SERIES_RADIUS) & (flat >= _ASYMPTOTIC_NEG), lambda v: _from_anchors(_negative_anchors(), v)),
        (flat < _ASYMPTOTIC_NEG, _airy_asym_neg),
    ]
    for sel, fn in regions:
        if np.any(sel):
            ai[sel], aip[sel] = fn(flat[sel])
    ai, aip = ai.reshape(x.shape), aip.reshape(x.shape)
    if ai.ndim == 0:
        return float(ai), float(aip)
    return ai, aip


def _airy_complex(z):
    z = np.asarray(z, dtype=complex)
    flat = z.ravel()
    ai = np.empty_like(flat)
    aip = np.empty_like(flat)
    small = np.abs(flat) <= _SERIES_RADIUS
    if np.any(small):
        ai[small], aip[small] = _airy_maclaurin(flat[small])
    if np.any(~small):
        big = flat[~small]
        if np.any(np.abs(np.angle(big)) > 2.0 * math.pi / 3.0):
            raise ValueError("complex Airy beyond |z| = 6 is only provided for |arg z| <= 2 pi/3")
        ai[~small], aip[~small] = _airy_asym_pos(big)
    ai, aip = ai.reshape(z.shape), aip.reshape(z.shape)
    if ai.ndim == 0:
        return complex(ai), complex(aip)
    return ai, aip


def airy_ai(x):
    return airy(x)[0]


# ---------------------------------------------------------------------------
# sine and Airy kernels


def sine_kernel(u, v):
    d = np.asarray(u, dtype=float) - np.asarray(v, dtype=float)
    out = np.sinc(d)
    return out if np.ndim(out) else float(out)


def airy_kernel(u, v, switch: float = 1e-8):
    u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
    au, apu = airy(u)
    av, apv = airy(v)
    d = u - v
    close = np.abs(d) < switch
    safe = np.where(close, 1.0, d)
    off = (au * apv - apu * av) / safe
    m = 0.5 * (u + v)
    am, apm = airy(m)
    diag = apm**2 - m * am**2
    out = np.where(close, diag, off)
    return out if np.ndim(out) else float(out)


# ---------------------------------------------------------------------------
# Pearcey integrals


def _p_nodes(b: float, n: int = 200):
    # cut where s^4/4 + b s^2/2 > 50 (integrand below e^{-50})
    S = 2.0
    while S**4 / 4.0 + b * S * S / 2.0 < 50.0:
        S += 0.25
    t, w = legendre.leggauss(n)
    s = 0.5 * S * (t + 1.0)
    return s, 0.5 * S * w


def pearcey_p(x, b: float, deriv: int = 0, n: int = 200):
    """d^k/dx^k of p(x) = (1/2pi) int exp(-s^4/4 - b s^2/2 + i s x) ds, k <= 3."""
    x = np.asarray(x, dtype=float)
    s, w = _p_nodes(b, n)
    base = w * np.exp(-(s**4) / 4.0 - b * s * s / 2.0) * s**deriv / math.pi
    arg = np.outer(x.ravel(), s)
    # (i s)^k e^{isx} + conjugate over s > 0 gives 2 Re((i)^k e^{isx}) s^k
    ik = 1j**deriv
    vals = np.real(ik * np.exp(1j * arg)) @ base
    out = vals.reshape(x.shape)
    return out if out.ndim else float(out)


# contour rays (angle, orientation): +1 means outward from 0 to infinity
_SIGMA = ((math.pi / 4, -1.0), (3 * math.pi / 4, 1.0), (-3 * math.pi / 4, -1.0), (-math.pi / 4, 1.0))


def _q_radius(y_max: float, b: float) -> float:
    R = 2.0
    while R**4 / 4.0 - abs(y_max) * R / math.sqrt(2.0) - 3.0 * math.log(R) < 50.0:
        R += 0.25
    return R


def pearcey_q(y, b: float, deriv: int = 0, n: int = 240):
    """d^k/dy^k of q(y) = (1/2pi) int_Sigma exp(t^4/4 + b t^2/2 + i t y) dt.

    Sigma is the four rays arg t = +-pi/4, +-3pi/4, traversed in from infinity
    along arg t = pi/4 and -3pi/4 and out to infinity along arg t = 3pi/4 and
    -pi/4.  With this orientation q is real and odd, and the numerator of the
    Pearcey kernel vanishes on the diagonal.  The result is real; a residual imaginary part above
    1e-10 raises QuadratureNonConvergence.
    """
    y = np.asarray(y, dtype=float)
    flat = y.ravel()
    R = _q_radius(float(np.max(np.abs(flat))) if flat.size else 0.0, b)
    t, w = legendre.leggauss(n)
    r = 0.5 * R * (t + 1.0)
    w = 0.5 * R * w
    total = np.zeros(flat.size, dtype=complex)
    for theta, orient in _SIGMA:
        e = np.exp(1j * theta)
        tt = r * e
        base = orient * e * w * np.exp(tt**4 / 4.0 + b * tt * tt / 2.0) * (1j * tt) ** deriv
        total += np.exp(1j * np.outer(flat, tt)) @ base
    total /= 2.0 * math.pi
    scale = max(1.0, float(np.max(np.abs(total.real))) if flat.size else 1.0)
    if flat.size and np.max(np.abs(total.imag)) > 1e-10 * scale:
        raise QuadratureNonConvergence(
            f"Pearcey contour integral has imaginary residue {np.max(np.abs(total.imag)):.2e}"
        )
    out = total.real.reshape(y.shape)
    return out if out.ndim else float(out)


def pearcey_kernel(x, y, b: float, switch: float = 1e-9):
    """(p(x) q''(y) - p'(x) q'(y) + p''(x) q(y) - b p(x) q(y)) / (x - y).

    Diagonal: p'(x) q''(x) - p''(x) q'(x) + x p(x) q(x).
    """
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    shape = x.shape
    xf, yf = x.ravel(), y.ravel()
    p = [pearcey_p(xf, b, k) for k in range(3)]
    q = [pearcey_q(yf, b, k) for k in range(3)]
    num = p[0] * q[2] - p[1] * q[1] + p[2] * q[0] - b * p[0] * q[0]
    d = xf - yf
    close = np.abs(d) < switch
    out = num / np.where(close, 1.0, d)
    if np.any(close):
        m = 0.5 * (xf[close] + yf[close])
        pm = [pearcey_p(m, b, k) for k in range(3)]
        qm = [pearcey_q(m, b, k) for k in range(3)]
        out[close] = pm[1] * qm[2] - pm[2] * qm[1] + m * pm[0] * qm[0]
    out = out.reshape(shape)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# kernels as objects and Fredholm determinants


@dataclass(frozen=True)
class KernelEvaluator:
    kind: str
    func: Callable
    params: dict = None

    def __call__(self, x, y):
        return self.func(x, y)


def make_kernel(kind: str, **params) -> KernelEvaluator:
    if kind == "sine":
        return KernelEvaluator("sine", sine_kernel, params)
    if kind == "airy":
        return KernelEvaluator("airy", airy_kernel, params)
    if kind == "pearcey":
        b = float(params.get("b", 0.0))
        return KernelEvaluator("pearcey", lambda x, y: pearcey_kernel(x, y, b), params)
    raise ValueError(f"unknown kernel kind {kind!r}")


def _fredholm_at(K, a, b, order):
    t, w = legendre.leggauss(order)
    x = 0.5 * (b - a) * (t + 1.0) + a
    w = 0.5 * (b - a) * w
    X, Y = np.meshgrid(x, x, indexing="ij")
    sw = np.sqrt(w)
    A = np.eye(order) - sw[:, None] * K(X, Y) * sw[None, :]
    return float(np.linalg.det(A))


def fredholm_det(K, interval, order: int = 16, tol: float = 1e-8, max_order: int = 512) -> float:
    """det(I - K) on L^2(interval) by Gauss-Legendre Nystrom, order doubled to tol.

    A semi-infinite interval (a, inf) is truncated at a + 12.
    """
    if order < 4:
        raise ValueError("order must be at least 4")
    a, b = float(interval[0]), float(interval[1])
    if math.isinf(b):
        b = a + 12.0
    if b <= a:
        return 1.0
    prev = _fredholm_at(K, a, b, order)
    while True:
        order *= 2
        cur = _fredholm_at(K, a, b, order)
        if abs(cur - prev) < tol:
            return cur
        if order >= max_order:
            raise NonConvergence(f"Fredholm determinant not converged (change {abs(cur - prev):.2e})")
        prev = cur
