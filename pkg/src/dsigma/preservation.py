"""(eta, delta)-preservation: how much of a subset ``S`` a shuffle maps back into ``S``.

A permutation preserves ``S`` to level ``eta`` when ``|{s(i) : i in S} & S|``
is at least ``eta * |S|``; ``delta`` is the probability that this fails.

Two routes are provided: Monte Carlo over the mechanism's actual
``sigma*`` law (any Kendall plan), and an exact count for the Hamming
Mallows law, checked against brute-force enumeration.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .groups import ShufflePlan
from .mechanism import sigma_star_batch
from .perm import Permutation, all_permutations_array
from .seeding import stream

MAX_EXACT_N = 20
MAX_BRUTE_FORCE_N = 8
METHODS = ("monte_carlo", "exact_hamming", "brute_force")


class PreservationError(ValueError):
    pass


@dataclass
class PreservationReport:
    subset: list[int]
    eta: float
    delta: float
    method: str
    n: int
    trials: int | None = None
    enumeration_size: int | None = None
    theta: float | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _subset_array(S, n: int) -> np.ndarray:
    arr = np.unique(np.asarray(list(S), dtype=np.int64))
    if arr.size == 0:
        raise PreservationError("subset S must be non-empty")
    if arr.min() < 0 or arr.max() >= n:
        raise PreservationError(f"subset entries must lie in [0, {n})")
    return arr


def overlap_fraction(sigma: Permutation, S) -> float:
    """``|{sigma(i) : i in S} & S| / |S|``."""
    s = _subset_array(S, sigma.n)
    inside = np.zeros(sigma.n, dtype=bool)
    inside[s] = True
    return float(inside[sigma.mapping[s]].sum() / s.size)


def overlap_counts(perms: np.ndarray, S: np.ndarray) -> np.ndarray:
    """Per-row overlap counts for a batch of permutations."""
    inside = np.zeros(perms.shape[1], dtype=bool)
    inside[S] = True
    return inside[perms[:, S]].sum(axis=1)


def eta_at_delta(overlaps: np.ndarray, size: int, delta: float) -> float:
    """Largest ``eta`` that at least ``(1 - delta)`` of the trials reach."""
    if not 0 <= delta <= 1:
        raise PreservationError("delta must lie in [0, 1]")
    ranked = np.sort(np.asarray(overlaps))[::-1]
    need = max(1, math.ceil((1 - delta) * ranked.size - 1e-9))
    return float(ranked[need - 1] / size)


def estimate_preservation(
    plan: ShufflePlan,
    S,
    eta: float,
    trials: int,
    seed: int,
    delta: float | None = None,
) -> PreservationReport:
    """Monte Carlo estimate of ``delta`` at ``eta`` for the plan's ``sigma*`` law.

    With ``delta`` given, the report also carries ``eta_at_delta``: the
    largest fraction preserved in at least ``(1 - delta)`` of the trials.
    """
    if trials < 1:
        raise PreservationError("trials must be >= 1")
    _check_eta(eta)
    s = _subset_array(S, plan.n)
    stars = sigma_star_batch(plan, trials, stream(seed, "preservation"))
    counts = overlap_counts(stars, s)
    fail = float(np.mean(counts < _min_overlap(s.size, eta)))
    extra = {"mean_overlap": float(counts.mean() / s.size), "width": plan.width}
    if delta is not None:
        extra["eta_at_delta"] = eta_at_delta(counts, s.size, delta)
        extra["delta_query"] = float(delta)
    return PreservationReport(
        subset=s.tolist(), eta=float(eta), delta=fail, method="monte_carlo",
        n=plan.n, trials=int(trials), theta=plan.theta, extra=extra,
    )


def _check_eta(eta: float) -> None:
    if not 0 <= eta <= 1:
        raise PreservationError(f"eta must lie in [0, 1], got {eta}")


def derangements(p: int) -> int:
    """Number of permutations of ``p`` items with no fixed point."""
    if p < 0:
        raise PreservationError("p must be >= 0")
    if p > MAX_EXACT_N:
        raise PreservationError(f"exact counts are limited to p <= {MAX_EXACT_N}")
    return _derangement(p)


@lru_cache(maxsize=None)
def _derangement(p: int) -> int:
    if p == 0:
        return 1
    if p == 1:
        return 0
    return (p - 1) * (_derangement(p - 1) + _derangement(p - 2))


@lru_cache(maxsize=None)
def _f(p: int, m: int) -> int:
    if m == 0:
        return _derangement(p)
    if p == 0:
        return math.factorial(m)
    return sum(
        math.comb(p, q) * math.comb(m, m - q) * math.factorial(m) * _f(p - q, q)
        for q in range(min(p, m) + 1)
    )


def f_table(p: int, m: int) -> int:
    """Arrangements of ``p`` type-A and ``m`` type-B objects into the
    ``p + m`` slots (one home slot per A, ``m`` free slots) with no A at home.
    """
    if p < 0 or m < 0:
        raise PreservationError("p and m must be >= 0")
    if p + m > MAX_EXACT_N:
        raise PreservationError(f"exact counts are limited to p + m <= {MAX_EXACT_N}")
    return _f(p, m)


def f_inclusion_exclusion(p: int, m: int) -> int:
    """Independent closed form for :func:`f_table`: ``sum_k (-1)^k C(p,k) (p+m-k)!``."""
    return sum((-1) ** k * math.comb(p, k) * math.factorial(p + m - k) for k in range(p + 1))


def _min_overlap(size: int, eta: float) -> int:
    """Smallest overlap count that still meets ``eta``: ``ceil(eta |S|)``."""
    return math.ceil(Fraction(eta).limit_denominator(10**9) * size)


def failure_threshold(size: int, eta: float) -> int:
    """``k = floor((1 - eta) |S|)``: failure means more than ``k`` members leave ``S``."""
    _check_eta(eta)
    return math.floor((1 - Fraction(eta).limit_denominator(10**9)) * size)


def c_h(h: int, n: int, size: int, k: int) -> int:
    """Permutations at Hamming distance ``h`` from the identity sending more than
    ``k`` members of a size-``size`` subset outside it.

    ``j`` members leave (and ``j`` outsiders enter), ``i`` further members
    move inside ``S`` and ``h - 2j - i`` outsiders move among themselves.
    """
    out = n - size
    total = 0
    for j in range(k + 1, min(size, out, h // 2) + 1):
        inner = 0
        for i in range(min(size - j, h - 2 * j) + 1):
            rest = h - 2 * j - i
            if rest > out - j:
                continue
            inner += math.comb(size - j, i) * _f(i, j) * math.comb(out - j, rest) * _f(rest, j)
        total += math.comb(size, j) * math.comb(out, j) * inner
    return total


def hamming_distance_counts(n: int) -> list[int]:
    """Number of permutations of ``n`` at each Hamming distance ``h = 0..n`` from a fixed one."""
    return [math.comb(n, h) * _derangement(h) for h in range(n + 1)]


def _weighted(theta: float, counts) -> float:
    return math.fsum(math.exp(-theta * h) * c for h, c in enumerate(counts) if c)


def exact_delta_hamming(theta: float, n: int, S, eta: float) -> float:
    """Exact failure probability under the Hamming Mallows law.

    ``S`` may be a subset or just its size (only the size matters).  Terms
    with ``h <= 2k + 1`` vanish, so the sum starts at ``h = 2k + 2``.
    """
    if n > MAX_EXACT_N:
        raise PreservationError(f"exact path is limited to n <= {MAX_EXACT_N}")
    if theta < 0:
        raise PreservationError("theta must be >= 0")
    size = int(S) if np.isscalar(S) else _subset_array(S, n).size
    if not 1 <= size <= n:
        raise PreservationError("subset size must lie in [1, n]")
    k = failure_threshold(size, eta)
    counts = [0] * (n + 1)
    for h in range(2 * k + 2, n + 1):
        counts[h] = c_h(h, n, size, k)
    return _weighted(theta, counts) / _weighted(theta, hamming_distance_counts(n))


def brute_force_delta_hamming(theta: float, n: int, S, eta: float) -> float:
    """Enumerate every permutation (``n <= 8``); test oracle for the exact formula."""
    if n > MAX_BRUTE_FORCE_N:
        raise PreservationError(f"brute force is limited to n <= {MAX_BRUTE_FORCE_N}")
    s = np.arange(int(S)) if np.isscalar(S) else _subset_array(S, n)
    perms = all_permutations_array(n)
    h = np.count_nonzero(perms != np.arange(n), axis=1)
    counts = overlap_counts(perms, s)
    fail = counts < _min_overlap(s.size, eta)
    w = np.exp(-theta * h)
    return float(math.fsum(w[fail]) / math.fsum(w))


def brute_force_counts(n: int, S, eta: float) -> list[int]:
    """Per-``h`` failure counts by enumeration, for comparison with :func:`c_h`."""
    s = np.arange(int(S)) if np.isscalar(S) else _subset_array(S, n)
    perms = all_permutations_array(n)
    h = np.count_nonzero(perms != np.arange(n), axis=1)
    fail = overlap_counts(perms, s) < _min_overlap(s.size, eta)
    return np.bincount(h[fail], minlength=n + 1).tolist()
