"""Orthogonal polynomials for the weight exp(-N V(x)).

Conventions: P_n monic, h_n = int P_n^2 e^{-NV}, psi_n = P_n e^{-NV/2}/sqrt(h_n),

    x P_n = P_{n+1} + beta_n P_n + gamma_n^2 P_{n-1},   gamma_n^2 = h_n/h_{n-1},

and Q is the symmetric tridiagonal matrix with Q[n, n] = beta_n and
Q[n, n-1] = Q[n-1, n] = gamma_n (indices from 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from numpy.polynomial import legendre
from scipy.linalg import solve_banded
from scipy.optimize import minimize

from .errors import LineSearchFailure, NonConvergence, NonPositiveGamma, PrecisionLoss
from .potential import Potential


@dataclass(frozen=True, eq=False)
class RecurrenceTable:
    """gamma[n] = gamma_n (gamma[0] = 0), beta[n] = beta_n, log_h[n] = ln h_n."""

    N: float
    gamma: np.ndarray
    beta: np.ndarray
    log_h: np.ndarray

    @property
    def nmax(self) -> int:
        return len(self.beta) - 1

    @property
    def h(self) -> np.ndarray:
        return np.exp(self.log_h)

    @property
    def gamma_sq(self) -> np.ndarray:
        return self.gamma**2

    @classmethod
    def gaussian(cls, N: float, nmax: int) -> "RecurrenceTable":
        """Closed form for V = x^2: gamma_n^2 = n/(2N), h_n = sqrt(pi/N) n!/(2N)^n."""
        n = np.arange(nmax + 1)
        gamma = np.sqrt(n / (2.0 * N))
        log_h = 0.5 * math.log(math.pi / N) + np.array(
            [math.lgamma(k + 1) for k in n]
        ) - n * math.log(2.0 * N)
        return cls(float(N), gamma, np.zeros(nmax + 1), log_h)

    def jacobi(self, size: int) -> "JacobiMatrix":
        if size > self.nmax + 1:
            raise ValueError(f"table holds {self.nmax + 1} rows, asked for {size}")
        return JacobiMatrix(self.beta[:size].copy(), self.gamma[1:size].copy())


@dataclass(frozen=True, eq=False)
class JacobiMatrix:
    diag: np.ndarray
    off: np.ndarray

    @property
    def size(self) -> int:
        return len(self.diag)

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.off, 1) + np.diag(self.off, -1)

    def sparse(self):
        return sp.diags([self.off, self.diag, self.off], [-1, 0, 1], format="csr")


# ---------------------------------------------------------------------------
# construction by discretised Stieltjes


def _cutoff(V: Potential, N: float, nmax: int, depth: float = 75.0) -> float:
    """Half-width L beyond which x^{2 nmax + 2} e^{-NV} is e^{-depth} below its peak."""
    power = 2 * nmax + 2

    def phi(x):
        return N * V(x) - power * np.log1p(np.abs(x))

    xs = np.linspace(-50, 50, 20001)
    base = float(np.min(phi(xs)))
    L = 1.0
    while phi(L) - base < depth or phi(-L) - base < depth:
        L *= 1.05
        if L > 1e6:
            raise NonConvergence("weight is not confining enough for the requested degree")
    return L


def _stieltjes(x, w, nmax, log_w0):
    q = np.sqrt(w)
    h0 = float(np.sum(w))
    q = q / math.sqrt(h0)
    basis = np.zeros((nmax + 1, len(x)))
    basis[0] = q
    beta = np.zeros(nmax + 1)
    gamma = np.zeros(nmax + 1)
    log_h = np.zeros(nmax + 1)
    log_h[0] = math.log(h0) + log_w0
    prev = np.zeros_like(q)
    for n in range(nmax + 1):
        beta[n] = float(np.dot(x * q, q))
        if n == nmax:
            break
        r = x * q - beta[n] * q - gamma[n] * prev
        for _ in range(2):
            r -= basis[: n + 1].T @ (basis[: n + 1] @ r)
        g = float(np.linalg.norm(r))
        if n > 0 and g * g < 1e-13 * gamma[1] ** 2:
            raise PrecisionLoss(
                f"recurrence lost precision at n = {n + 1} (gamma^2 = {g * g:.3e})", index=n + 1
            )
        gamma[n + 1] = g
        log_h[n + 1] = log_h[n] + 2.0 * math.log(g)
        prev, q = q, r / g
        basis[n + 1] = q
    return gamma, beta, log_h


def recurrence_from_weight(
    V: Potential, N: float, nmax: int, tol: float = 1e-12, max_nodes: int = 1 << 15
) -> RecurrenceTable:
    """Recurrence coefficients up to index nmax by Stieltjes on Gauss-Legendre nodes.

    The node count doubles until gamma and beta agree to ``tol``.
    """
    if V.coeffs[-1] <= 0:
        raise ValueError("weight is not integrable")
    L = _cutoff(V, N, nmax)
    m = max(64, 2 * nmax + 64)
    prev = None
    while True:
        t, wt = legendre.leggauss(m)
        x = L * t
        expo = -N * V(x)
        shift = float(np.max(expo))
        w = L * wt * np.exp(expo - shift)
        table = _stieltjes(x, w, nmax, shift)
        if prev is not None:
            dg = np.max(np.abs(table[0] - prev[0]) / np.maximum(table[0], 1e-300))
            db = np.max(np.abs(table[1] - prev[1])) / max(1.0, float(np.max(table[0])))
            if dg < tol and db < tol:
                break
        if 2 * m > max_nodes:
            raise NonConvergence("recurrence quadrature did not reach the target accuracy")
        prev = table
        m *= 2
    gamma, beta, log_h = table
    return RecurrenceTable(float(N), gamma, beta, log_h)


# ---------------------------------------------------------------------------
# matrix functions of Q


def _poly_of_matrix(coeffs, Q):
    """sum_k coeffs[k] Q^k by Horner (dense or sparse Q)."""
    n = Q.shape[0]
    eye = sp.identity(n, format="csr") if sp.issparse(Q) else np.eye(n)
    acc = coeffs[-1] * eye
    for c in reversed(coeffs[:-1]):
        acc = acc @ Q + c * eye
    return acc


def vprime_of_Q(V: Potential, table: RecurrenceTable, size: int) -> np.ndarray:
    """V'(Q) truncated to size x size; entries more than p-1 from the edge are exact."""
    full = min(table.nmax + 1, size + V.degree)
    Q = table.jacobi(full).dense()
    return _poly_of_matrix(V.derivative().coef, Q)[:size, :size]


def q_power(table: RecurrenceTable, k: int, size: int) -> np.ndarray:
    full = min(table.nmax + 1, size + k + 1)
    Q = table.jacobi(full).dense()
    return np.linalg.matrix_power(Q, k)[:size, :size]


def string_residual(V: Potential, table: RecurrenceTable, n: int):
    """(gamma_n [V'(Q)]_{n,n-1} - n/N, [V'(Q)]_{nn})."""
    if n < 1 or n + V.degree > table.nmax + 1:
        raise ValueError(f"n = {n} outside the exact band of the table")
    W = vprime_of_Q(V, table, n + 1)
    return (table.gamma[n] * W[n, n - 1] - n / table.N, W[n, n])


def dv_derivatives(V: Potential, N: float, k: int, n: int, table: RecurrenceTable = None):
    """(d ln h_n, d gamma_n, d beta_n) / d v_k from powers of Q."""
    if table is None:
        table = recurrence_from_weight(V, N, n + k + 2)
    Qk = q_power(table, k, n + 2)
    g = table.gamma
    dlnh = -N * Qk[n, n]
    dgam = N * 0.5 * g[n] * (Qk[n - 1, n - 1] - Qk[n, n]) if n >= 1 else 0.0
    dbeta = N * ((g[n] * Qk[n, n - 1] if n >= 1 else 0.0) - g[n + 1] * Qk[n + 1, n])
    return dlnh, dgam, dbeta


# ---------------------------------------------------------------------------
# Hamiltonian of the string equations


def _hamiltonian_matrix(gammas, betas, boundary):
    M = len(betas)
    off = np.concatenate([np.asarray(gammas, dtype=float), [boundary]])
    diag = np.concatenate([np.asarray(betas, dtype=float), [0.0]])
    return sp.diags([off, diag, off], [-1, 0, 1], format="csr"), M


def hamiltonian(V: Potential, gammas, betas, N: float, M: int, boundary: float = 0.0) -> float:
    """N Tr V(Q) - sum_{n=1}^{M-1} n ln gamma_n^2 with gamma_0 = 0, gamma_M = boundary.

    gammas holds gamma_1..gamma_{M-1}, betas holds beta_0..beta_{M-1}.
    """
    gammas = np.asarray(gammas, dtype=float)
    if len(gammas) != M - 1 or len(betas) != M:
        raise ValueError("need M-1 gammas and M betas")
    if np.any(gammas <= 0):
        raise NonPositiveGamma("all gamma_n must be positive")
    Q, _ = _hamiltonian_matrix(gammas, betas, boundary)
    VQ = _poly_of_matrix(V.full_coeffs(), Q)
    n = np.arange(1, M)
    return float(N * VQ.diagonal().sum() - np.sum(n * np.log(gammas**2)))


def hamiltonian_gradient(V: Potential, gammas, betas, N: float, M: int, boundary: float = 0.0):
    """(dH/dgamma_n, dH/dbeta_n) = (2N[V'(Q)]_{n,n-1} - 2n/gamma_n, N[V'(Q)]_{nn})."""
    gammas = np.asarray(gammas, dtype=float)
    Q, _ = _hamiltonian_matrix(gammas, betas, boundary)
    W = _poly_of_matrix(V.derivative().coef, Q).tocsr()
    n = np.arange(1, M)
    sub = np.asarray(W[n, n - 1]).ravel()
    dg = 2.0 * N * sub - 2.0 * n / gammas
    db = N * np.asarray(W.diagonal()[:M]).ravel()
    return dg, db


def uniform_profile(V: Potential, lam):
    """Root R of sum_m (2m+2) v_{2m+2} C(2m+1, m) R^{m+1} = lam (even V)."""
    c = V.coeffs
    coef = [0.0]
    for m in range(len(c) // 2):
        coef.append((2 * m + 2) * c[2 * m + 1] * math.comb(2 * m + 1, m))
    out = []
    for l in np.atleast_1d(lam):
        p = np.array(coef, dtype=float)
        p[0] -= l
        roots = np.roots(p[::-1])
        real = roots[(np.abs(roots.imag) < 1e-10) & (roots.real > 0)].real
        out.append(float(np.max(real)) if real.size else float("nan"))
    return np.array(out)


def quartic_profiles(t: float, g: float, lam):
    """(R, L) of the even quartic: R uniform above lambda_c, R, L the period-2 pair below.

    Below lambda_c = t^2/(4g) (t < 0) the pair solves R + L = -t/g, R L = lam/g;
    above it R = (-t + sqrt(t^2 + 12 g lam))/(6 g) and L = R.
    """
    lam = np.asarray(lam, dtype=float)
    uni = (-t + np.sqrt(t * t + 12.0 * g * lam)) / (6.0 * g)
    if t >= 0:
        return uni, uni.copy()
    disc = t * t / (g * g) - 4.0 * lam / g
    below = disc >= 0
    sq = np.sqrt(np.where(below, disc, 0.0))
    R = np.where(below, 0.5 * (-t / g + sq), uni)
    L = np.where(below, 0.5 * (-t / g - sq), uni)
    return R, L


def _initial_profile(V: Potential, N: float, M: int) -> np.ndarray:
    n = np.arange(1, M)
    lam = n / N
    c = V.coeffs
    if V.degree == 4:
        t, g = 2.0 * c[1], 4.0 * c[3]
        R, L = quartic_profiles(t, g, lam)
        return np.where(n % 2 == 1, R, L)
    return uniform_profile(V, lam)


def _y_gradient(V: Potential, y, N, M, boundary):
    g = np.sqrt(y)
    dg, _ = hamiltonian_gradient(V, g, np.zeros(M), N, M, boundary)
    return dg / (2.0 * g)


def _y_hamiltonian(V, y, N, M, boundary):
    return hamiltonian(V, np.sqrt(y), np.zeros(M), N, M, boundary)


@dataclass(frozen=True, eq=False)
class MinimizerResult:
    N: float
    M: int
    gamma_sq: np.ndarray  # gamma_1^2 .. gamma_{M-1}^2
    grad_norm: float
    iterations: int

    def string_residuals(self, V: Potential) -> np.ndarray:
        """gamma_n [V'(Q)]_{n,n-1} - n/N for n = 1..M-1 on the minimiser."""
        g = np.sqrt(self.gamma_sq)
        dg, _ = hamiltonian_gradient(V, g, np.zeros(self.M), self.N, self.M)
        return 0.5 * g * dg / self.N


def minimize_hamiltonian(
    V: Potential,
    N: float,
    M: int = None,
    boundary: float = 0.0,
    tol: float = 1e-10,
    max_newton: int = 50,
) -> MinimizerResult:
    """Stationary point of the truncated Hamiltonian for even V.

    Conjugate gradients in y_n = gamma_n^2 from the scaling profile, then a
    banded Newton polish on the gradient equations.
    """
    if not V.is_even:
        raise ValueError("the Hamiltonian minimiser is implemented for even V")
    if M is None:
        M = int(N)
    y0 = _initial_profile(V, N, M)
    if np.any(~np.isfinite(y0)) or np.any(y0 <= 0):
        y0 = np.full(M - 1, 0.5)

    def fun(y):
        if np.any(y <= 0):
            return np.inf
        return _y_hamiltonian(V, y, N, M, boundary)

    def jac(y):
        return _y_gradient(V, np.abs(y), N, M, boundary)

    res = minimize(fun, y0, jac=jac, method="CG", options={"maxiter": 400, "gtol": 1e-6})
    y = res.x if np.all(res.x > 0) and np.isfinite(res.fun) else y0
    its = int(res.nit)

    # banded Newton on grad_y H = 0
    bw = max(1, V.degree // 2 - 1)
    G = jac(y)
    for it in range(max_newton):
        gnorm = float(np.max(np.abs(G)))
        if gnorm < tol:
            break
        J = np.zeros((2 * bw + 1, M - 1))
        ncol = 2 * bw + 1
        for color in range(ncol):
            idx = np.arange(color, M - 1, ncol)
            step = 1e-7 * np.maximum(y[idx], 1e-3)
            yp, ym = y.copy(), y.copy()
            yp[idx] += step
            ym[idx] -= step
            d = jac(yp) - jac(ym)
            for j, s in zip(idx, step):
                lo, hi = max(0, j - bw), min(M - 1, j + bw + 1)
                for i in range(lo, hi):
                    J[bw + i - j, j] = d[i] / (2 * s)
        delta = solve_banded((bw, bw), J, -G)
        lam = 1.0
        while lam > 1e-8:
            trial = y + lam * delta
            if np.all(trial > 0):
                Gt = jac(trial)
                if np.max(np.abs(Gt)) < gnorm or np.max(np.abs(Gt)) < 10 * tol:
                    break
            lam *= 0.5
        else:
            raise LineSearchFailure(f"Newton polish stalled with |grad| = {gnorm:.3e}")
        y, G = trial, Gt
        its += 1
    else:
        if np.max(np.abs(G)) >= tol:
            raise LineSearchFailure(f"minimiser did not converge, |grad| = {np.max(np.abs(G)):.3e}")
    return MinimizerResult(float(N), M, y, float(np.max(np.abs(G))), its)


# ---------------------------------------------------------------------------
# psi functions and kernels


def psi_all(table: RecurrenceTable, V: Potential, x, n: int, derivative: bool = False):
    """psi_0..psi_n at x (rows), optionally with derivatives.

    The recurrence runs on scaled mantissas with a per-point log scale so that
    e^{-NV/2} never underflows before the polynomial growth is applied.
    """
    if n > table.nmax:
        raise ValueError(f"table only reaches degree {table.nmax}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    N = table.N
    g, b = table.gamma, table.beta
    logscale = -0.5 * N * V(x) - 0.5 * table.log_h[0]
    P = np.zeros((n + 1, x.size))
    D = np.zeros((n + 1, x.size))
    P[0] = 1.0
    D[0] = -0.5 * N * V.derivative()(x)
    for k in range(n):
        nxt = (x - b[k]) * P[k] - (g[k] * P[k - 1] if k > 0 else 0.0)
        dn = P[k] + (x - b[k]) * D[k] - (g[k] * D[k - 1] if k > 0 else 0.0)
        P[k + 1] = nxt / g[k + 1]
        D[k + 1] = dn / g[k + 1]
        big = np.abs(P[k + 1]) > 1e150
        if np.any(big):
            s = np.where(big, np.abs(P[k + 1]), 1.0)
            P[: k + 2] /= s
            D[: k + 2] /= s
            logscale = logscale + np.log(s)
    def scaled(A):
        with np.errstate(divide="ignore"):
            return np.sign(A) * np.exp(np.log(np.abs(A)) + logscale)

    if derivative:
        return scaled(P), scaled(D)
    return scaled(P)


def psi(table: RecurrenceTable, V: Potential, N: float, n: int, x):
    out = psi_all(table, V, x, n)[n]
    return out if np.ndim(x) else out[0]


def cd_kernel(table: RecurrenceTable, V: Potential, N: int, x, y, switch: float = 1e-6):
    """Christoffel-Darboux kernel of rank N, confluent form near the diagonal."""
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    shape = x.shape
    x, y = x.ravel(), y.ravel()
    gN = table.gamma[N]
    close = np.abs(x - y) < switch * max(1.0, float(np.max(np.abs(np.concatenate([x, y])))))
    out = np.empty(x.size)
    if np.any(~close):
        px = psi_all(table, V, x[~close], N)
        py = psi_all(table, V, y[~close], N)
        num = px[N] * py[N - 1] - px[N - 1] * py[N]
        out[~close] = gN * num / (x[~close] - y[~close])
    if np.any(close):
        mid = 0.5 * (x[close] + y[close])
        P, D = psi_all(table, V, mid, N, derivative=True)
        out[close] = gN * (D[N] * P[N - 1] - D[N - 1] * P[N])
    out = out.reshape(shape)
    return out if out.ndim else out[()]


def kernel_sum(table: RecurrenceTable, V: Potential, N: int, x, y):
    """sum_{n<N} psi_n(x) psi_n(y)."""
    px = psi_all(table, V, x, N - 1)
    py = psi_all(table, V, y, N - 1)
    return np.sum(px * py, axis=0)


def correlation_function(table: RecurrenceTable, V: Potential, N: int, points) -> float:
    """R_m(x_1..x_m) = det K_N(x_k, x_l)."""
    pts = np.asarray(points, dtype=float)
    X, Y = np.meshgrid(pts, pts, indexing="ij")
    K = cd_kernel(table, V, N, X, Y)
    return float(np.linalg.det(K))


correlation_functions = correlation_function
