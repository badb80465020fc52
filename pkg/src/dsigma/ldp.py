"""k-ary randomized response and helpers built on its channel matrix."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class RandomizerError(ValueError):
    pass


@dataclass(frozen=True)
class RandomizerConfig:
    """``epsilon``-LDP randomized response over ``domain_size`` categories."""

    epsilon: float
    domain_size: int = 2

    def __post_init__(self):
        eps = float(self.epsilon)
        if not (eps >= 0 and math.isfinite(eps)):
            raise RandomizerError(f"epsilon must be finite and >= 0, got {self.epsilon}")
        if int(self.domain_size) != self.domain_size or self.domain_size < 2:
            raise RandomizerError(f"domain_size must be an integer >= 2, got {self.domain_size}")
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "domain_size", int(self.domain_size))

    @property
    def keep_probability(self) -> float:
        # e^eps / (e^eps + k - 1), written to stay finite for large eps
        return 1.0 / (1.0 + (self.domain_size - 1) * math.exp(-self.epsilon))

    @property
    def flip_probability(self) -> float:
        """Probability of each specific other category."""
        return (1.0 - self.keep_probability) / (self.domain_size - 1)


def _check_categories(cfg: RandomizerConfig, x: np.ndarray) -> None:
    if x.size and (x.min() < 0 or x.max() >= cfg.domain_size):
        bad = x[(x < 0) | (x >= cfg.domain_size)][0]
        raise RandomizerError(f"category {bad} outside [0, {cfg.domain_size})")


def randomize(cfg: RandomizerConfig, x, rng: np.random.Generator):
    """Randomize one category or an array of them.

    Each value is kept with probability ``keep_probability``; otherwise it is
    replaced by one of the other ``k - 1`` categories uniformly at random.
    """
    scalar = np.ndim(x) == 0
    arr = np.atleast_1d(np.asarray(x))
    if not np.issubdtype(arr.dtype, np.integer):
        raise RandomizerError("categories must be integers")
    arr = arr.astype(np.int64)
    _check_categories(cfg, arr)
    keep = rng.random(arr.shape) < cfg.keep_probability
    # shift by 1..k-1 so a replaced value is never the original
    shift = rng.integers(1, cfg.domain_size, size=arr.shape)
    out = np.where(keep, arr, (arr + shift) % cfg.domain_size)
    return int(out[0]) if scalar else out


def channel_matrix(cfg: RandomizerConfig) -> np.ndarray:
    """``M[a, b] = P(output b | input a)``."""
    k = cfg.domain_size
    m = np.full((k, k), cfg.flip_probability)
    np.fill_diagonal(m, cfg.keep_probability)
    return m


def log_channel_matrix(cfg: RandomizerConfig) -> np.ndarray:
    """Log of :func:`channel_matrix`, computed without cancellation."""
    k = cfg.domain_size
    log_norm = math.log1p((k - 1) * math.exp(-cfg.epsilon))
    m = np.full((k, k), -cfg.epsilon - log_norm)
    np.fill_diagonal(m, -log_norm)
    return m


def ldp_ratio_audit(cfg: RandomizerConfig) -> float:
    """Largest ``log P(b | a) - log P(b | a')`` over all inputs and outputs."""
    lm = log_channel_matrix(cfg)
    return float((lm.max(axis=0) - lm.min(axis=0)).max())


def estimate_frequencies(cfg: RandomizerConfig, y, *, clip: bool = True) -> np.ndarray:
    """Unbiased category frequencies from randomized outputs.

    Inverts ``E[hist] = M^T p``; with ``clip`` the estimate is projected back
    onto the simplex by clipping negatives and renormalizing.
    """
    y = np.asarray(y, dtype=np.int64)
    if y.size == 0:
        raise RandomizerError("no observations")
    _check_categories(cfg, y)
    k = cfg.domain_size
    observed = np.bincount(y, minlength=k) / y.size
    est = debias(cfg, observed)
    return project_simplex(est) if clip else est


def debias(cfg: RandomizerConfig, observed: np.ndarray) -> np.ndarray:
    """Invert the channel on (a batch of) observed frequency vectors along the last axis."""
    keep, flip = cfg.keep_probability, cfg.flip_probability
    if keep == flip:
        return np.full_like(np.asarray(observed, dtype=float), 1.0 / cfg.domain_size)
    return (np.asarray(observed, dtype=float) - flip) / (keep - flip)


def project_simplex(p: np.ndarray) -> np.ndarray:
    """Clip negatives and renormalize along the last axis; all-zero rows become uniform."""
    p = np.clip(np.asarray(p, dtype=float), 0.0, None)
    total = p.sum(axis=-1, keepdims=True)
    k = p.shape[-1]
    return np.where(total > 0, p / np.where(total > 0, total, 1.0), 1.0 / k)
