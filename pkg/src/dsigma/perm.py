"""Permutations, their algebra, and the two rank distances used by the mechanism.

Storage is 0-based: ``mapping[k]`` is the index whose value lands at slot
``k`` when the permutation is applied to a sequence.  Text I/O uses 1-based
indices.

Composition convention (fixed project-wide)::

    apply(compose(a, b), x) == apply(a, apply(b, x))
    compose(a, b).mapping[k] == b.mapping[a.mapping[k]]
"""

from __future__ import annotations

import itertools
import math
from typing import Iterator, Sequence

import numpy as np

from . import kernels

MAX_ENUMERATION_N = 10


class PermutationError(ValueError):
    """Invalid permutation data or mismatched sizes."""


class Permutation:
    """Immutable bijection on ``{0, ..., n-1}``."""

    __slots__ = ("_m", "_hash")

    def __init__(self, mapping: Sequence[int] | np.ndarray, *, _trusted: bool = False):
        m = np.array(mapping, dtype=np.int64)
        if not _trusted:
            if m.ndim != 1 or m.size == 0:
                raise PermutationError("a permutation needs a non-empty 1-D mapping")
            seen = np.zeros(m.size, dtype=bool)
            if m.min() < 0 or m.max() >= m.size:
                raise PermutationError(f"mapping entries must lie in [0, {m.size})")
            seen[m] = True
            if not seen.all():
                raise PermutationError("mapping is not a bijection")
        m.flags.writeable = False
        self._m = m
        self._hash = None

    @classmethod
    def from_one_based(cls, values: Sequence[int]) -> "Permutation":
        return cls([int(v) - 1 for v in values])

    @classmethod
    def parse(cls, line: str) -> "Permutation":
        """Parse one whitespace-separated line of 1-based indices."""
        try:
            values = [int(tok) for tok in line.split()]
        except ValueError as exc:
            raise PermutationError(f"not a permutation line: {line!r}") from exc
        return cls.from_one_based(values)

    @property
    def mapping(self) -> np.ndarray:
        return self._m

    @property
    def n(self) -> int:
        return int(self._m.size)

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, k):
        return int(self._m[k])

    def one_based(self) -> list[int]:
        return [int(v) + 1 for v in self._m]

    def format(self) -> str:
        return " ".join(str(v) for v in self.one_based())

    def __eq__(self, other):
        if not isinstance(other, Permutation):
            return NotImplemented
        return self._m.size == other._m.size and bool(np.array_equal(self._m, other._m))

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self._m.tobytes())
        return self._hash

    def __repr__(self):
        if self.n <= 20:
            return f"Permutation({self.format()})"
        return f"Permutation(n={self.n})"


def _check_same_size(a: Permutation, b: Permutation) -> None:
    if a.n != b.n:
        raise PermutationError(f"size mismatch: {a.n} vs {b.n}")


def identity(n: int) -> Permutation:
    if n < 1:
        raise PermutationError("identity requires n >= 1")
    return Permutation(np.arange(n), _trusted=True)


def apply(sigma: Permutation, x):
    """Reorder ``x`` so that ``result[k] == x[sigma(k)]``.

    numpy arrays stay arrays; any other sequence comes back as a list.
    """
    if len(x) != sigma.n:
        raise PermutationError(f"sequence of length {len(x)} does not match n={sigma.n}")
    if isinstance(x, np.ndarray):
        return x[sigma.mapping]
    return [x[k] for k in sigma.mapping.tolist()]


def inverse(sigma: Permutation) -> Permutation:
    inv = np.empty_like(sigma.mapping)
    inv[sigma.mapping] = np.arange(sigma.n)
    return Permutation(inv, _trusted=True)


def compose(a: Permutation, b: Permutation) -> Permutation:
    """Permutation equivalent to applying ``b`` first, then ``a``."""
    _check_same_size(a, b)
    return Permutation(b.mapping[a.mapping], _trusted=True)


def kendall_tau(sigma: Permutation, pi: Permutation) -> int:
    """Count index pairs ``i < j`` ordered differently by ``sigma`` and ``pi``."""
    _check_same_size(sigma, pi)
    # relabel so that pi becomes the identity, then count inversions
    inv_pi = np.empty_like(pi.mapping)
    inv_pi[pi.mapping] = np.arange(pi.n)
    return kernels.count_inversions(sigma.mapping[inv_pi])


def kendall_tau_reference(sigma: Permutation, pi: Permutation) -> int:
    """Quadratic double loop over index pairs; test oracle for :func:`kendall_tau`."""
    _check_same_size(sigma, pi)
    s, p = sigma.mapping.tolist(), pi.mapping.tolist()
    count = 0
    for i in range(len(s)):
        for j in range(i + 1, len(s)):
            if (s[i] > s[j]) != (p[i] > p[j]):
                count += 1
    return count


def hamming(sigma: Permutation, pi: Permutation) -> int:
    _check_same_size(sigma, pi)
    return int(np.count_nonzero(sigma.mapping != pi.mapping))


def item_kendall_tau(sigma: Permutation, pi: Permutation) -> int:
    """Kendall's tau between the item orders listed by two permutations.

    Counts pairs of items (values) whose relative position differs, i.e.
    ``kendall_tau(inverse(sigma), inverse(pi))``.  This is the orientation
    the Mallows sampler uses.
    """
    _check_same_size(sigma, pi)
    inv_pi = np.empty_like(pi.mapping)
    inv_pi[pi.mapping] = np.arange(pi.n)
    return kernels.count_inversions(inv_pi[sigma.mapping])


def max_kendall_tau(n: int) -> int:
    return n * (n - 1) // 2


def enumerate_permutations(n: int) -> Iterator[Permutation]:
    """Yield all ``n!`` permutations in lexicographic order."""
    if n < 1:
        raise PermutationError("n must be >= 1")
    if n > MAX_ENUMERATION_N:
        raise PermutationError(
            f"refusing to enumerate {n}! permutations; bound is n <= {MAX_ENUMERATION_N}"
        )
    for tup in itertools.permutations(range(n)):
        yield Permutation(tup, _trusted=True)


def all_permutations_array(n: int) -> np.ndarray:
    """All permutations of ``n`` as an ``(n!, n)`` array, lexicographic order."""
    if n < 1:
        raise PermutationError("n must be >= 1")
    if n > MAX_ENUMERATION_N:
        raise PermutationError(
            f"refusing to enumerate {n}! permutations; bound is n <= {MAX_ENUMERATION_N}"
        )
    out = np.fromiter(
        itertools.chain.from_iterable(itertools.permutations(range(n))),
        dtype=np.int64,
        count=math.factorial(n) * n,
    )
    return out.reshape(-1, n)


def inversions_batch(perms: np.ndarray) -> np.ndarray:
    """Inversion count of every row of a small ``(m, n)`` permutation array."""
    perms = np.asarray(perms)
    n = perms.shape[1]
    i, j = np.triu_indices(n, k=1)
    return np.count_nonzero(perms[:, i] > perms[:, j], axis=1)


def inverse_batch(perms: np.ndarray) -> np.ndarray:
    perms = np.asarray(perms)
    out = np.empty_like(perms)
    rows = np.arange(perms.shape[0])[:, None]
    out[rows, perms] = np.arange(perms.shape[1])
    return out


def index_of_permutations(perms: np.ndarray) -> np.ndarray:
    """Lexicographic rank of each row (matches :func:`all_permutations_array`)."""
    perms = np.asarray(perms, dtype=np.int64)
    m, n = perms.shape
    ranks = np.zeros(m, dtype=np.int64)
    for k in range(n):
        smaller_later = np.count_nonzero(perms[:, k + 1:] < perms[:, k:k + 1], axis=1)
        ranks += smaller_later * math.factorial(n - 1 - k)
    return ranks
