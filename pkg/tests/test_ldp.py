import math

import numpy as np
import pytest

from dsigma.groups import GroupAssignment, plan_from_assignment
from dsigma import mechanism
from dsigma.ldp import (
    RandomizerConfig,
    RandomizerError,
    channel_matrix,
    estimate_frequencies,
    ldp_ratio_audit,
    randomize,
)


def test_keep_probability():
    assert RandomizerConfig(0.0, 2).keep_probability == 0.5
    assert RandomizerConfig(2.5, 2).keep_probability == pytest.approx(math.exp(2.5) / (math.exp(2.5) + 1))
    assert RandomizerConfig(2.0, 5).keep_probability == pytest.approx(math.exp(2) / (math.exp(2) + 4))


def test_high_epsilon_keeps_input():
    rng = np.random.default_rng(0)
    x = rng.integers(0, 2, size=10_000)
    y = randomize(RandomizerConfig(20.0, 2), x, rng)
    assert np.mean(x == y) >= 0.999


def test_keep_frequency_binomial():
    cfg = RandomizerConfig(2.5, 2)
    rng = np.random.default_rng(1)
    x = np.zeros(100_000, dtype=int)
    kept = np.mean(randomize(cfg, x, rng) == 0)
    assert abs(kept - 0.924) < 0.005


def test_flips_spread_uniformly():
    cfg = RandomizerConfig(1.0, 4)
    y = randomize(cfg, np.full(200_000, 2), np.random.default_rng(3))
    freq = np.bincount(y, minlength=4) / y.size
    assert np.allclose(freq, channel_matrix(cfg)[2], atol=0.005)


def test_scalar_and_validation():
    cfg = RandomizerConfig(1.0, 3)
    assert randomize(cfg, 1, np.random.default_rng(0)) in (0, 1, 2)
    with pytest.raises(RandomizerError):
        randomize(cfg, 3, np.random.default_rng(0))
    with pytest.raises(RandomizerError):
        randomize(cfg, np.array([0.5]), np.random.default_rng(0))
    with pytest.raises(RandomizerError):
        RandomizerConfig(-1.0, 2)
    with pytest.raises(RandomizerError):
        RandomizerConfig(1.0, 1)
    with pytest.raises(RandomizerError):
        RandomizerConfig(math.inf, 2)


@pytest.mark.parametrize("k", [2, 3, 5, 8])
@pytest.mark.parametrize("eps", [0.0, 0.5, 1.0, 2.5, 30.0])
def test_channel_rows_and_audit(k, eps):
    cfg = RandomizerConfig(eps, k)
    assert np.allclose(channel_matrix(cfg).sum(axis=1), 1.0, atol=1e-15)
    assert abs(ldp_ratio_audit(cfg) - eps) <= 1e-12


def test_frequency_estimation_unbiased():
    cfg = RandomizerConfig(1.5, 3)
    rng = np.random.default_rng(4)
    x = rng.choice(3, size=200_000, p=[0.6, 0.3, 0.1])
    est = estimate_frequencies(cfg, randomize(cfg, x, rng))
    assert np.allclose(est, [0.6, 0.3, 0.1], atol=0.01)
    assert est.sum() == pytest.approx(1.0)


def test_shuffle_never_reads_x():
    # the shuffler only sees y; its draw is a function of plan and seed alone
    import inspect

    params = inspect.signature(mechanism.shuffle).parameters
    assert list(params) == ["plan", "y", "seed"]
    g = GroupAssignment.full(4)
    plan = plan_from_assignment(g, 1.0)
    a = mechanism.shuffle(plan, np.array([0, 1, 0, 1]), 5).sigma_star
    b = mechanism.shuffle(plan, np.array([1, 1, 1, 0]), 5).sigma_star
    assert a == b
