"""Metropolis sampling of the eigenvalue density exp(-H_N(lambda)),
H_N = -sum_{j != k} ln|lambda_j - lambda_k| + N sum V(lambda_j)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import CoincidentPoints
from .potential import Potential

RNG_ALGORITHM = "numpy.random.PCG64"
_CHUNK = 512  # sweeps of random numbers drawn at a time


def log_density(V: Potential, N: float, lambdas) -> float:
    """-H_N(lambda)."""
    lam = np.asarray(lambdas, dtype=float)
    diff = np.abs(lam[:, None] - lam[None, :])
    iu = np.triu_indices(len(lam), 1)
    if np.any(diff[iu] == 0.0):
        raise CoincidentPoints("coincident eigenvalues give -infinity")
    return float(2.0 * np.sum(np.log(diff[iu])) - N * np.sum(V(lam)))


@numba.njit(cache=True)
def _poly(c, x):
    acc = 0.0
    for k in range(len(c) - 1, -1, -1):
        acc = acc * x + c[k]
    return acc


@numba.njit(cache=True)
def _delta(c, N, state, i, new):
    """Change of -H_N when particle i moves to ``new``."""
    old = state[i]
    d = -N * (_poly(c, new) - _poly(c, old))
    for j in range(len(state)):
        if j != i:
            a = abs(new - state[j])
            if a == 0.0:
                return -np.inf
            d += 2.0 * (math.log(a) - math.log(abs(old - state[j])))
    return d


@numba.njit(cache=True)
def _sweeps(c, N, state, step, normals, uniforms, adapt, out, thin, start):
    """Run len(normals) sweeps; returns (step, accepted, proposed, rows written)."""
    n = len(state)
    accepted = 0
    proposed = 0
    written = 0
    win_acc = 0
    for s in range(normals.shape[0]):
        for i in range(n):
            new = state[i] + step * normals[s, i]
            d = _delta(c, N, state, i, new)
            proposed += 1
            if d >= 0.0 or uniforms[s, i] < math.exp(d):
                state[i] = new
                accepted += 1
                win_acc += 1
        if adapt and (s + 1) % 50 == 0:
            rate = win_acc / (50.0 * n)
            if rate < 0.2:
                step *= 0.8
            elif rate > 0.5:
                step *= 1.25
            win_acc = 0
        if out.shape[0] > 0 and (start + s) % thin == 0:
            out[written, :] = state
            written += 1
    return step, accepted, proposed, written


@dataclass
class LogGasChain:
    N: int
    V: Potential
    seed: int
    state: np.ndarray = None
    step: float = 0.1
    accepted: int = 0
    proposed: int = 0
    rng: np.random.Generator = field(default=None, repr=False)

    def __post_init__(self):
        if self.state is None:
            # symmetric spread inside the bulk of a confining well
            self.state = np.linspace(-1.5, 1.5, self.N) if self.N > 1 else np.zeros(1)
        self.state = np.array(self.state, dtype=float)
        if self.rng is None:
            self.rng = np.random.Generator(np.random.PCG64(self.seed))

    @property
    def acceptance(self) -> float:
        return self.accepted / self.proposed if self.proposed else 0.0

    def log_density(self) -> float:
        return log_density(self.V, self.N, self.state)

    def delta(self, i: int, new: float) -> float:
        """Incremental change of the log-density for a single-site move."""
        return float(_delta(self.V.full_coeffs(), float(self.N), self.state, i, new))


def _advance(chain: LogGasChain, sweeps: int, adapt: bool, out, thin: int, start: int) -> int:
    c = chain.V.full_coeffs()
    written = 0
    done = 0
    while done < sweeps:
        m = min(_CHUNK, sweeps - done)
        normals = chain.rng.standard_normal((m, chain.N))
        uniforms = chain.rng.random((m, chain.N))
        view = out[written:] if out is not None else np.zeros((0, chain.N))
        step, acc, prop, w = _sweeps(
            c, float(chain.N), chain.state, chain.step, normals, uniforms, adapt, view, thin, start + done
        )
        chain.step = step
        if not adapt:
            chain.accepted += acc
            chain.proposed += prop
        written += w
        done += m
    return written


def metropolis_run(chain: LogGasChain, sweeps: int, burn_fraction: float = 0.2, thin: int = 1) -> np.ndarray:
    """Burn-in with step adaptation, then ``sweeps - burn`` recorded sweeps every ``thin``.

    Returns an array of shape (kept, N).
    """
    if sweeps < 1 or thin < 1:
        raise ValueError("sweeps and thin must be positive")
    burn = int(burn_fraction * sweeps)
    _advance(chain, burn, True, None, thin, 0)
    keep = sweeps - burn
    out = np.empty(((keep + thin - 1) // thin, chain.N))
    written = _advance(chain, keep, False, out, thin, 0)
    return out[:written]


def histogram_distance(samples: np.ndarray, density, lo: float, hi: float, bins: int = 20, n_sub: int = 64):
    """Sup over bins of |empirical bin density - bin average of ``density``|."""
    flat = np.ravel(samples)
    counts, edges = np.histogram(flat, bins=bins, range=(lo, hi))
    emp = counts / (flat.size * (edges[1] - edges[0]))
    ref = np.empty(bins)
    for k in range(bins):
        xs = np.linspace(edges[k], edges[k + 1], n_sub + 1)
        xs = 0.5 * (xs[1:] + xs[:-1])
        ref[k] = float(np.mean(density(xs)))
    return float(np.max(np.abs(emp - ref))), emp, ref, edges
