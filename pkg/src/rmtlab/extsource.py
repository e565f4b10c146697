"""Gaussian random matrix model with external source diag(a, ..., a, -a, ..., -a).

The eigenvalue weight is exp(-n (x^2/2 - a_i x)) with a_1 = a (multiplicity
n1) and a_2 = -a (multiplicity n2).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev, hermite_e, legendre
from numpy.polynomial import polynomial as P

from .errors import IllConditioned
from .orthopoly import _stieltjes

# ---------------------------------------------------------------------------
# Pastur equation xi^3 - x xi^2 - (a^2 - 1) xi + x a^2 = 0


def pastur_coeffs(x, a: float) -> np.ndarray:
    """Rows of cubic coefficients (highest first) for each x."""
    x = np.atleast_1d(np.asarray(x, dtype=complex))
    one = np.ones_like(x)
    return np.stack([one, -x, -(a * a - 1.0) * one, a * a * x], axis=-1)


def _cubic_roots(coeffs: np.ndarray) -> np.ndarray:
    """Roots of monic cubics (rows, highest first) via companion eigenvalues and two Newton polishes."""
    c = coeffs / coeffs[:, :1]
    m = len(c)
    comp = np.zeros((m, 3, 3), dtype=complex)
    comp[:, 0, :] = -c[:, 1:]
    comp[:, 1, 0] = 1.0
    comp[:, 2, 1] = 1.0
    r = np.linalg.eigvals(comp)
    for _ in range(2):
        f = ((r + c[:, 1:2]) * r + c[:, 2:3]) * r + c[:, 3:4]
        df = (3.0 * r + 2.0 * c[:, 1:2]) * r + c[:, 2:3]
        ok = np.abs(df) > 1e-8 * (1.0 + np.abs(r) ** 2)
        r = np.where(ok, r - f / np.where(ok, df, 1.0), r)
    return r


def _best_match(prev: np.ndarray, new: np.ndarray):
    """Permutation of ``new`` closest to ``prev``; the match is trusted when every
    root moved less than a third of its distance to the nearest other root."""
    gaps = np.abs(prev[:, None] - prev[None, :]) + np.diag([np.inf] * 3)
    near = np.maximum(np.min(gaps, axis=1), 1e-300)
    best, order = np.inf, None
    for perm in itertools.permutations(range(3)):
        cost = np.sum(np.abs(new[list(perm)] - prev) / near)
        if cost < best:
            best, order = cost, perm
    cand = new[list(order)]
    ok = bool(np.all(np.abs(cand - prev) < near / 3.0))
    return cand, ok


def _track(coeff_fn, asym_fn, x: np.ndarray, eps: float = 1e-12) -> np.ndarray:
    """Roots labelled by continuation from |x| = 1e6 along the upper side of the real axis.

    ``asym_fn(z)`` gives the three labelled large-z approximations.
    """
    out = np.empty((len(x), 3), dtype=complex)
    for side in (1.0, -1.0):
        idx = np.where(x >= 0)[0] if side > 0 else np.where(x < 0)[0]
        if len(idx) == 0:
            continue
        order = idx[np.argsort(-side * x[idx])]  # from the far end inward
        z = side * 1e6 + 1j * eps
        roots, _ = _best_match(asym_fn(z), _cubic_roots(coeff_fn(np.array([z])))[0])
        step = 1e5
        for k in order:
            target = x[k] + 1j * eps
            while z != target:
                dz = target - z
                znew = target if abs(dz) <= step else z + dz / abs(dz) * step
                new = _cubic_roots(coeff_fn(np.array([znew])))[0]
                cand, ok = _best_match(roots, new)
                if ok or step < 1e-10:
                    z, roots = znew, cand
                    step = min(step * 2.0, 0.05 * max(1.0, abs(z.real)))
                else:
                    step *= 0.5
            # final roots at the real point itself, labelled by the tracked values
            exact = _cubic_roots(coeff_fn(np.array([x[k] + 0j])))[0]
            out[k], _ = _best_match(roots, exact)
    return out


def pastur_roots(x, a: float) -> np.ndarray:
    """Labelled roots (xi_1, xi_2, xi_3) at real x, boundary values from Im z > 0.

    xi_1 ~ x - 1/x, xi_{2,3} ~ +-a + 1/(2x) at infinity.
    """
    if a < 0:
        raise ValueError("a must be >= 0")
    xs = np.atleast_1d(np.asarray(x, dtype=float))

    def asym(z):
        return np.array([z - 1.0 / z, a + 0.5 / z, -a + 0.5 / z])

    r = _track(lambda z: pastur_coeffs(z, a), asym, xs)
    return r if np.ndim(x) else r[0]


def z_of_xi(xi, a: float):
    """Inverse map x = xi (xi^2 + 1 - a^2)/(xi^2 - a^2)."""
    xi = np.asarray(xi)
    return xi * (xi * xi + 1.0 - a * a) / (xi * xi - a * a)


@dataclass(frozen=True)
class BranchPoints:
    a: float
    z1: float  # outer real branch points +-z1
    z2: float  # +-z2 on the real axis (a >= 1) or +-i z2 (a < 1)
    imaginary: bool


def branch_points(a: float) -> BranchPoints:
    """Critical values of z(xi): xi^4 - (1 + 2a^2) xi^2 + a^4 - a^2 = 0."""
    if a <= 0:
        raise ValueError("a must be > 0")
    disc = math.sqrt(1.0 + 8.0 * a * a)
    s_big = 0.5 * (1.0 + 2.0 * a * a + disc)
    s_small = 0.5 * (1.0 + 2.0 * a * a - disc)
    xi1 = math.sqrt(s_big)
    z1 = abs(float(z_of_xi(xi1, a)))
    if s_small > 0:
        z2 = abs(float(z_of_xi(math.sqrt(s_small), a)))
        return BranchPoints(a, z1, z2, False)
    if s_small == 0:
        return BranchPoints(a, z1, 0.0, False)
    xi2 = 1j * math.sqrt(-s_small)
    z2 = abs(complex(z_of_xi(xi2, a)))
    return BranchPoints(a, z1, z2, True)


def pastur_density(x, a: float):
    """rho(x) = |Im xi(x)| / pi with xi the non-real root of the Pastur cubic (zero off the support)."""
    if a < 0:
        raise ValueError("a must be >= 0")
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    r = _cubic_roots(pastur_coeffs(xs, a))
    im = np.max(np.abs(r.imag), axis=1)
    scale = 1.0 + np.max(np.abs(r), axis=1)
    rho = np.where(im > 1e-9 * scale, im / math.pi, 0.0)
    return rho if np.ndim(x) else float(rho[0])


def support(a: float):
    """Support intervals of the limiting density."""
    bp = branch_points(a)
    if bp.imaginary or bp.z2 == 0.0:
        return [(-bp.z1, bp.z1)]
    return [(-bp.z1, -bp.z2), (bp.z2, bp.z1)]


# ---------------------------------------------------------------------------
# modified Pastur equation near a = 1


def modified_constants(a: float):
    """c = (a + sqrt(a^2 + 8))/4 and p = c^2 - 1."""
    c = (a + math.sqrt(a * a + 8.0)) / 4.0
    return c, c * c - 1.0


def modified_pastur(x, a: float) -> np.ndarray:
    """Labelled xi_k = w_k + p/w_k where w_k invert x = w^3/(w^2 - c^2)."""
    c, p = modified_constants(a)
    xs = np.atleast_1d(np.asarray(x, dtype=float))

    def coeffs(z):
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        one = np.ones_like(z)
        return np.stack([one, -z, 0.0 * one, c * c * z], axis=-1)

    def asym(z):
        return np.array([z - c * c / z, c + 0.5 * c * c / z, -c + 0.5 * c * c / z])

    w = _track(coeffs, asym, xs)
    xi = w + p / w
    return xi if np.ndim(x) else xi[0]


def modified_pastur_residual(xi, x, a: float):
    """Left side of the modified Pastur equation."""
    c, _ = modified_constants(a)
    return xi**3 - x * xi**2 + (1 - a * a) * xi + a * a * x + (c * c - 1.0) ** 3 / (c * c * x)


# ---------------------------------------------------------------------------
# multiple Hermite polynomials


def gaussian_moments(mu: float, n: float, kmax: int) -> np.ndarray:
    """int x^k exp(-n (x^2/2 - mu x)) dx for k = 0..kmax."""
    out = np.zeros(kmax + 1)
    # E[(mu + Z/sqrt n)^k] by the recurrence m_k = mu m_{k-1} + (k-1)/n m_{k-2}
    m = np.zeros(kmax + 1)
    m[0] = 1.0
    if kmax >= 1:
        m[1] = mu
    for k in range(2, kmax + 1):
        m[k] = mu * m[k - 1] + (k - 1) / n * m[k - 2]
    out[:] = m * math.exp(n * mu * mu / 2.0) * math.sqrt(2.0 * math.pi / n)
    return out


def _weight_moments(a: float, n: float, kmax: int):
    return gaussian_moments(a, n, kmax), gaussian_moments(-a, n, kmax)


def mhp_coeffs_determinant(n1: int, n2: int, a: float, n: float) -> np.ndarray:
    """Monic P_{n1,n2} (coefficients low to high) from the orthogonality conditions.

    The conditions against x^j e^{-n(x^2/2 -+ a x)} are imposed through the
    equivalent Hermite test functions He_j(sqrt(n)(x -+ a)), with the unknown
    expanded in Chebyshev polynomials of x/L.  Every entry is an exact
    Gauss-Hermite sum, and the system stays well conditioned when the plain
    moment matrix does not.
    """
    deg = n1 + n2
    if deg == 0:
        return np.array([1.0])
    L = abs(a) + 1.0
    z, wz = hermite_e.hermegauss(deg + 1)
    rows, rhs = [], []
    for mu, cnt in ((a, n1), (-a, n2)):
        x = mu + z / math.sqrt(n)
        T = chebyshev.chebvander(x / L, deg)  # (nodes, deg + 1)
        H = hermite_e.hermevander(z, max(cnt - 1, 0))
        for j in range(cnt):
            row = (wz * H[:, j]) @ T
            row /= np.max(np.abs(row))
            rows.append(row[:deg])
            rhs.append(-row[deg])
    A = np.array(rows)
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > 1e13:
        raise IllConditioned(f"orthogonality system condition number {cond:.2e}; use the recurrence route")
    c = np.concatenate([np.linalg.solve(A, np.array(rhs)), [1.0]])
    mono = chebyshev.cheb2poly(c) / L ** np.arange(deg + 1)
    return mono / mono[-1]


def mhp_table_recurrence(n1: int, n2: int, a: float, n: float) -> dict:
    """P_{i,j} for i + j <= n1 + n2, j <= n2 as coefficient arrays.

    Row j = 0 from P_{i+1,0} = (z - a) P_{i,0} - (i/n) P_{i-1,0}; higher rows
    from P_{i,j} = P_{i+1,j-1} + 2a P_{i,j-1}.
    """
    deg = n1 + n2
    table = {(0, 0): np.array([1.0])}
    prev = np.array([0.0])
    for i in range(deg):
        nxt = P.polysub(P.polymul([-a, 1.0], table[(i, 0)]), (i / n) * prev)
        prev = table[(i, 0)]
        table[(i + 1, 0)] = nxt
    for j in range(1, n2 + 1):
        for i in range(0, deg - j + 1):
            table[(i, j)] = P.polyadd(table[(i + 1, j - 1)], 2.0 * a * table[(i, j - 1)])
    return table


@dataclass(frozen=True, eq=False)
class MHPState:
    n1: int
    n2: int
    a: float
    n: float
    coeffs: np.ndarray  # monic P_{n1,n2}, low to high
    h1: float
    h2: float
    route: str

    def __call__(self, x):
        return P.polyval(np.asarray(x, dtype=float), self.coeffs)

    def orthogonality_residuals(self) -> np.ndarray:
        """int P x^j w_i dx for j < n_i, relative to h-scale moments."""
        deg = self.n1 + self.n2
        m1, m2 = _weight_moments(self.a, self.n, 2 * deg + 2)
        out = []
        for m, cnt in ((m1, self.n1), (m2, self.n2)):
            for j in range(cnt):
                val = float(np.dot(self.coeffs, m[j : j + deg + 1]))
                scale = float(np.dot(np.abs(self.coeffs), np.abs(m[j : j + deg + 1])))
                out.append(val / scale)
        return np.array(out)


def _h_constants(coeffs, n1, n2, a, n):
    deg = len(coeffs) - 1
    m1, m2 = _weight_moments(a, n, deg + max(n1, n2) + 1)
    h1 = float(np.dot(coeffs, m1[n1 : n1 + deg + 1]))
    h2 = float(np.dot(coeffs, m2[n2 : n2 + deg + 1]))
    return h1, h2


def mhp_build(n1: int, n2: int, a: float, n: float = None, route: str = "recurrence") -> MHPState:
    """Multiple Hermite polynomial P_{n1,n2} for weights exp(-n(x^2/2 -+ a x))."""
    if n1 < 0 or n2 < 0:
        raise ValueError("multiplicities must be >= 0")
    if n is None:
        n = max(n1 + n2, 1)
    if route == "determinant":
        c = mhp_coeffs_determinant(n1, n2, a, n)
    elif route == "recurrence":
        c = mhp_table_recurrence(n1, n2, a, n)[(n1, n2)]
    else:
        raise ValueError(f"unknown route {route!r}")
    h1, h2 = _h_constants(c, n1, n2, a, n)
    return MHPState(n1, n2, a, float(n), np.asarray(c, dtype=float), h1, h2, route)


# ---------------------------------------------------------------------------
# correlation kernel
#
# K_n(x, y) = exp(-(V(x) + V(y))/2) sum_k P_k(x) Q_k(y) with V = n x^2/2 is the
# projection onto polynomials of degree < n along the annihilator of
# Sigma_n = span{x^j e^{n a x}, j < n1} + span{x^j e^{-n a x}, j < n2}.
# With bases phi_i of the first space and chi_j of the second and
# G_ij = int phi_i chi_j, K(x, y) = phi(x)^T G^{-T} chi(y).
#
# The split exp(-V/2) on each side is replaced by exp(-V/2 + s) and
# exp(-V/2 - s) with s(x) = n kappa |x| / 2, which moves both families onto a
# common region; the factor exp(s(y) - s(x)) restores K. Each family is
# orthonormalised by Stieltjes on a shared quadrature grid.


def _log_weights(n: float, a: float, kappa: float):
    """Squared log-weights of the polynomial family and the two Sigma families."""

    def w0(x):
        return -0.5 * n * x * x + n * kappa * np.abs(x)

    def w1(x):
        return -0.5 * n * x * x + 2.0 * n * a * x - n * kappa * np.abs(x)

    def w2(x):
        return -0.5 * n * x * x - 2.0 * n * a * x - n * kappa * np.abs(x)

    return w0, w1, w2


@dataclass(frozen=True, eq=False)
class _Family:
    log_w: object
    gamma: np.ndarray
    beta: np.ndarray
    log_h0: float

    def __call__(self, x, kmax: int) -> np.ndarray:
        """Orthonormal p_k(x) sqrt(W(x)) for k < kmax (rows)."""
        x = np.asarray(x, dtype=float)
        out = np.empty((kmax,) + x.shape)
        logscale = 0.5 * self.log_w(x) - 0.5 * self.log_h0
        cur = np.ones(x.shape)
        prev = np.zeros(x.shape)
        g, b = self.gamma, self.beta
        for k in range(kmax):
            out[k] = cur * np.exp(logscale)
            if k + 1 == kmax:
                break
            nxt = ((x - b[k]) * cur - g[k] * prev) / g[k + 1]
            prev, cur = cur, nxt
            big = np.abs(cur) > 1e100
            if np.any(big):
                sc = np.where(big, np.abs(cur), 1.0)
                cur, prev = cur / sc, prev / sc
                out[: k + 1] /= sc
                logscale = logscale + np.log(sc)
        return out


def _family(log_w, x, wq, kmax: int) -> _Family:
    lw = log_w(x)
    shift = float(np.max(lw))
    gamma, beta, log_h = _stieltjes(x, wq * np.exp(lw - shift), max(kmax - 1, 0), shift)
    return _Family(log_w, gamma, beta, float(log_h[0]))


@dataclass(frozen=True, eq=False)
class MHPKernel:
    n: int
    a: float
    n1: int
    n2: int
    kappa: float
    fam: tuple
    gram: np.ndarray
    cond: float

    def _s(self, x):
        return 0.5 * self.n * self.kappa * np.abs(x)

    def _phi(self, x):
        return self.fam[0](x, self.n)

    def _chi(self, y):
        parts = [f(y, k) for f, k in ((self.fam[1], self.n1), (self.fam[2], self.n2)) if k > 0]
        return np.concatenate(parts, axis=0)

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        x, y = np.broadcast_arrays(x, y)
        xr, yr = x.ravel(), y.ravel()
        coef = np.linalg.solve(self.gram.T, self._chi(yr))
        out = np.sum(self._phi(xr) * coef, axis=0) * np.exp(self._s(yr) - self._s(xr))
        out = out.reshape(x.shape)
        return out if out.ndim else float(out)

    def diagonal(self, x):
        return self(x, x)

    def density(self, x):
        return self.diagonal(x) / self.n


def mhp_kernel_build(
    n: int, a: float, n1: int = None, n2: int = None, nodes: int = None, kappa: float = None,
    raise_ill: bool = True,
) -> MHPKernel:
    """Kernel of the external-source model; n1 = n2 = n/2 unless given."""
    if n1 is None or n2 is None:
        if n % 2:
            raise ValueError("n must be even when n1 = n2 = n/2")
        n1 = n2 = n // 2
    if n1 + n2 != n:
        raise ValueError("n1 + n2 must equal n")
    a = float(a)
    L = abs(a) + 3.0 + 12.0 / math.sqrt(n)
    m = nodes or (4 * n + 200)
    t, w = legendre.leggauss(m)
    # split at 0 where |x| has a kink
    x = np.concatenate([0.5 * L * (t - 1.0), 0.5 * L * (t + 1.0)])
    wq = np.concatenate([0.5 * L * w, 0.5 * L * w])
    if kappa is None:
        # empirically the Gram matrix is best conditioned near this slope
        kappa = a - 0.25 / a if a >= 0.5 else 0.0
    w0, w1, w2 = _log_weights(n, a, kappa)
    fam = (_family(w0, x, wq, n), _family(w1, x, wq, max(n1, 1)), _family(w2, x, wq, max(n2, 1)))
    k = MHPKernel(n, a, n1, n2, kappa, fam, np.zeros((n, n)), 0.0)
    G = (k._phi(x) * wq) @ k._chi(x).T
    cond = float(np.linalg.cond(G))
    if raise_ill and (not np.isfinite(cond) or cond > 1e13):
        raise IllConditioned(f"Gram matrix condition number {cond:.2e} at n = {n}, a = {a}")
    return MHPKernel(n, a, n1, n2, kappa, fam, G, cond)


def mhp_kernel(n: int, a: float, x, y):
    """K_n(x, y) for n1 = n2 = n/2 and weight scale n."""
    return mhp_kernel_build(n, a)(x, y)


def mhp_density(n: int, a: float, x):
    """K_n(x, x)/n, the finite-n mean eigenvalue density."""
    return mhp_kernel_build(n, a).density(x)


# Christoffel-Darboux route, practical for small n


def _q_function(m1: int, m2: int, a: float, n: float):
    """Coefficients (alpha, beta) of Q = sum alpha_k x^k e^{n a x} + sum beta_k x^k e^{-n a x}.

    int x^j Q e^{-n x^2/2} dx = 0 for j < m1 + m2 - 1 and = 1 for j = m1 + m2 - 1.
    """
    m = m1 + m2
    mom1, mom2 = _weight_moments(a, n, 2 * m)
    A = np.zeros((m, m))
    for j in range(m):
        A[j, :m1] = mom1[j : j + m1]
        A[j, m1:] = mom2[j : j + m2]
    rhs = np.zeros(m)
    rhs[-1] = 1.0
    sol = np.linalg.solve(A, rhs)
    return sol[:m1], sol[m1:]


def _q_eval(alpha, beta, a, n, y):
    y = np.asarray(y, dtype=float)
    return P.polyval(y, alpha) * np.exp(n * a * y) + P.polyval(y, beta) * np.exp(-n * a * y)


def mhp_kernel_cd(n: int, a: float, x, y, n1: int = None, n2: int = None):
    """K_n(x, y) from the three-term Christoffel-Darboux form with a confluent diagonal."""
    if n1 is None or n2 is None:
        n1 = n2 = n // 2
    N = float(n)
    table = mhp_table_recurrence(n1, n2, a, N)
    p0 = table[(n1, n2)]
    p1 = table[(n1 - 1, n2)] if n1 > 0 else np.array([0.0])
    p2 = table[(n1, n2 - 1)] if n2 > 0 else np.array([0.0])
    h = {}
    for key in ((n1, n2), (n1 - 1, n2), (n1, n2 - 1)):
        if min(key) >= 0:
            h[key] = _h_constants(table[key], key[0], key[1], a, N)
    r1 = h[(n1, n2)][0] / h[(n1 - 1, n2)][0] if n1 > 0 else 0.0
    r2 = h[(n1, n2)][1] / h[(n1, n2 - 1)][1] if n2 > 0 else 0.0
    q0 = _q_function(n1, n2, a, N)
    q1 = _q_function(n1 + 1, n2, a, N)
    q2 = _q_function(n1, n2 + 1, a, N)

    def num(px, y):
        return (
            px[0] * _q_eval(*q0, a, N, y)
            - r1 * px[1] * _q_eval(*q1, a, N, y)
            - r2 * px[2] * _q_eval(*q2, a, N, y)
        )

    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x, y = np.broadcast_arrays(x, y)
    vals = [P.polyval(x, p) for p in (p0, p1, p2)]
    ders = [P.polyval(x, P.polyder(p)) if len(p) > 1 else 0.0 * x for p in (p0, p1, p2)]
    diff = x - y
    near = np.abs(diff) < 1e-9
    safe = np.where(near, 1.0, diff)
    off = num(vals, y) / safe
    diag = num(ders, y)
    out = np.where(near, diag, off) * np.exp(-N * (x * x + y * y) / 4.0)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Brownian bridges and the cusp scaling


def bridge_map(t: float):
    """External source a(t) = sqrt(t/(1-t)) and eigenvalue scale 1/sqrt(t(1-t))."""
    if not 0.0 < t < 1.0:
        raise ValueError("bridge time must satisfy 0 < t < 1")
    return math.sqrt(t / (1.0 - t)), 1.0 / math.sqrt(t * (1.0 - t))


def cusp_scaled_kernel(n: int, b: float, x, y):
    """n^{-3/4} K_n(x n^{-3/4}, y n^{-3/4}) at a = 1 + b/(2 sqrt n)."""
    a = 1.0 + b / (2.0 * math.sqrt(n))
    s = n ** (-0.75)
    k = mhp_kernel_build(n, a)
    return s * k(np.asarray(x) * s, np.asarray(y) * s)
