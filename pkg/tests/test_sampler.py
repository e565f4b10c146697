import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rmtlab.errors import CoincidentPoints
from rmtlab.potential import Potential
from rmtlab.sampler import LogGasChain, histogram_distance, log_density, metropolis_run


def test_log_density_example():
    assert log_density(Potential.gaussian(), 2, [0.0, 1.0]) == pytest.approx(-2.0, abs=1e-15)


def test_coincident_points():
    with pytest.raises(CoincidentPoints):
        log_density(Potential.gaussian(), 3, [0.0, 1.0, 1.0])


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=3, max_size=8, unique=True))
def test_log_density_permutation_invariant(lam):
    lam = np.array(lam)
    if np.min(np.abs(np.subtract.outer(lam, lam))[np.triu_indices(len(lam), 1)]) < 1e-6:
        return
    V = Potential.quartic(-1.0)
    assert math.isclose(log_density(V, len(lam), lam), log_density(V, len(lam), lam[::-1]), rel_tol=1e-12, abs_tol=1e-12)


def test_detailed_balance_ratio():
    V = Potential.quartic(-3.0)
    chain = LogGasChain(12, V, 11)
    rng = np.random.default_rng(2)
    base = chain.log_density()
    for _ in range(100):
        i = int(rng.integers(12))
        new = chain.state[i] + 0.3 * rng.standard_normal()
        moved = chain.state.copy()
        moved[i] = new
        assert abs(chain.delta(i, new) - (log_density(V, 12, moved) - base)) < 1e-12 * max(1.0, abs(base))


def test_gaussian_semicircle_and_acceptance():
    chain = LogGasChain(40, Potential.gaussian(), 3)
    s = metropolis_run(chain, 20_000, thin=10)
    d, *_ = histogram_distance(s, lambda x: np.sqrt(np.maximum(2 - x * x, 0)) / np.pi, -math.sqrt(2), math.sqrt(2))
    assert d < 0.05
    assert 0.2 <= chain.acceptance <= 0.5


def test_seeded_determinism_and_seed_sensitivity():
    V = Potential.quartic(-1.0)
    a = metropolis_run(LogGasChain(10, V, 5), 2000)
    b = metropolis_run(LogGasChain(10, V, 5), 2000)
    c = metropolis_run(LogGasChain(10, V, 6), 2000)
    assert a.tobytes() == b.tobytes()
    assert a.tobytes() != c.tobytes()


def test_run_validates_arguments():
    with pytest.raises(ValueError):
        metropolis_run(LogGasChain(4, Potential.gaussian(), 0), 0)
