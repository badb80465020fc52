"""Mallows distributions over permutations.

``P(s) = exp(-theta * d(s, sigma0)) / psi(theta)``.  For Kendall's tau the
distance counts pairs of *items* that ``s`` and ``sigma0`` list in opposite
order, which is what the repeated insertion sampler produces.  Hamming is
supported for probabilities and normalizers only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .perm import (
    Permutation,
    PermutationError,
    all_permutations_array,
    hamming,
    item_kendall_tau,
    inverse,
    inversions_batch,
)

RANK_DISTANCES = ("kendall", "hamming")
MAX_HAMMING_N = 20


class MallowsError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class MallowsParams:
    theta: float
    sigma0: Permutation
    rank_distance: str = "kendall"

    def __post_init__(self):
        theta = float(self.theta)
        if not theta >= 0 or math.isinf(theta):
            raise MallowsError(f"theta must be finite and >= 0, got {self.theta}")
        if self.rank_distance not in RANK_DISTANCES:
            raise MallowsError(
                f"unknown rank distance {self.rank_distance!r}; choose from {RANK_DISTANCES}"
            )
        object.__setattr__(self, "theta", theta)

    @property
    def n(self) -> int:
        return self.sigma0.n


def derangement_counts(n: int) -> list[int]:
    """``[!0, !1, ..., !n]`` as exact integers."""
    out = [1, 0]
    for p in range(2, n + 1):
        out.append((p - 1) * (out[-1] + out[-2]))
    return out[: n + 1]


def log_normalizer(theta: float, n: int, rank_distance: str = "kendall") -> float:
    """``log psi(theta)``.

    Kendall: ``sum_{i=1..n} log((1 - e^{-i theta}) / (1 - e^{-theta}))``, which
    is ``log n!`` at ``theta = 0``.  Hamming: ``log sum_h C(n, h) !h e^{-theta h}``.
    """
    if rank_distance == "kendall":
        if theta == 0:
            return math.lgamma(n + 1)
        i = np.arange(1, n + 1, dtype=float)
        return float(np.sum(np.log(-np.expm1(-i * theta))) - n * math.log(-math.expm1(-theta)))
    if rank_distance == "hamming":
        if n > MAX_HAMMING_N:
            raise MallowsError(f"Hamming normalizer supports n <= {MAX_HAMMING_N}, got {n}")
        der = derangement_counts(n)
        terms = [
            math.log(math.comb(n, h) * der[h]) - theta * h
            for h in range(n + 1) if der[h]
        ]
        top = max(terms)
        return top + math.log(sum(math.exp(t - top) for t in terms))
    raise MallowsError(f"unknown rank distance {rank_distance!r}")


def distance_to_reference(p: MallowsParams, sigma: Permutation) -> int:
    if p.rank_distance == "kendall":
        return item_kendall_tau(sigma, p.sigma0)
    return hamming(sigma, p.sigma0)


def log_prob(p: MallowsParams, sigma: Permutation) -> float:
    if sigma.n != p.n:
        raise PermutationError(f"size mismatch: {sigma.n} vs {p.n}")
    return -p.theta * distance_to_reference(p, sigma) - log_normalizer(p.theta, p.n, p.rank_distance)


def exact_pmf(p: MallowsParams) -> np.ndarray:
    """Probabilities of all ``n!`` permutations, in :func:`all_permutations_array` order."""
    perms = all_permutations_array(p.n)
    if p.rank_distance == "kendall":
        dist = inversions_batch(inverse(p.sigma0).mapping[perms])
    else:
        dist = np.count_nonzero(perms != p.sigma0.mapping[None, :], axis=1)
    logw = -p.theta * dist
    w = np.exp(logw - logw.max())
    return w / w.sum()


def insertion_probabilities(theta: float, n: int) -> np.ndarray:
    """``(n, n)`` table; row ``i`` is the law of the insertion offset of item ``i``.

    Item ``i`` (0-based) joins ``i`` already placed items; offset ``v`` in
    ``0..i`` means it lands ``v`` slots before the end, creating ``v``
    inversions, with probability proportional to ``e^{-theta v}``.
    """
    if theta < 0:
        raise MallowsError("theta must be >= 0")
    v = np.arange(n)
    i = np.arange(n)[:, None]
    logits = np.where(v[None, :] <= i, -theta * v[None, :], -np.inf)
    w = np.exp(logits)
    return w / w.sum(axis=1, keepdims=True)


def draw_offsets(theta: float, n: int, count: int, rng: np.random.Generator, table=None) -> np.ndarray:
    """Insertion offsets for ``count`` draws by inverse-CDF sampling.

    Without ``table`` the truncated geometric law is inverted in closed form.
    """
    u = rng.random((count, n))
    if table is not None:
        cdf = np.cumsum(table, axis=1)
        cdf[:, -1] = 1.0
        out = np.empty((count, n), dtype=np.int64)
        for i in range(n):
            out[:, i] = np.searchsorted(cdf[i, : i + 1], u[:, i], side="right")
        return np.minimum(out, np.arange(n))
    size = np.arange(1, n + 1, dtype=float)
    if theta == 0:
        v = np.floor(u * size)
    else:
        mass = -np.expm1(-theta * size)
        v = np.floor(-np.log1p(-u * mass) / theta)
    return np.minimum(v.astype(np.int64), np.arange(n))


def sample_identity_batch(theta: float, n: int, count: int, rng, table=None) -> np.ndarray:
    """Draws from the Kendall Mallows law centred at the identity, one per row."""
    return kernels.rim_insert(draw_offsets(theta, n, count, rng, table))


def _check_sampleable(p: MallowsParams) -> None:
    if p.rank_distance != "kendall":
        raise MallowsError("only Kendall's tau Mallows sampling is supported")


def sample_batch(p: MallowsParams, count: int, rng, table=None) -> np.ndarray:
    """``(count, n)`` array of draws centred at ``p.sigma0``.

    A draw ``rho`` around the identity is relabelled item-wise,
    ``s[m] = sigma0[rho[m]]``, which preserves the item-pair distance.
    """
    _check_sampleable(p)
    rho = sample_identity_batch(p.theta, p.n, count, rng, table)
    return p.sigma0.mapping[rho]


def sample(p: MallowsParams, rng, table=None) -> Permutation:
    return Permutation(sample_batch(p, 1, rng, table)[0], _trusted=True)
