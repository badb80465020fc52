"""Group assignment from public auxiliary data, the reference permutation,
width and sensitivity, and the data-independent :class:`ShufflePlan`.
"""

from __future__ import annotations

import hashlib
import json
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .perm import (
    Permutation,
    all_permutations_array,
    identity,
    inverse,
    inversions_batch,
)

POINT_METRICS = ("euclidean", "manhattan")
GRAPH_METRIC = "hops"
RANK_DISTANCES = ("kendall", "hamming")
TIE_BREAKS = ("ascending", "listed")
MAX_HAMMING_ENUMERATION_N = 8

# rows of the pairwise-distance matrix materialised at once
_DISTANCE_CHUNK_ELEMENTS = 4_000_000


class GroupingError(ValueError):
    pass


@dataclass(frozen=True)
class AuxInfo:
    """Public auxiliary information: either point coordinates or a graph."""

    points: np.ndarray | None = None
    adjacency: tuple[tuple[int, ...], ...] | None = None

    def __post_init__(self):
        if (self.points is None) == (self.adjacency is None):
            raise GroupingError("AuxInfo needs exactly one of points or adjacency")
        if self.points is not None:
            pts = np.asarray(self.points, dtype=float)
            if pts.ndim == 1:
                pts = pts[:, None]
            if pts.ndim != 2 or pts.shape[0] == 0:
                raise GroupingError("points must be a non-empty (n, d) array")
            object.__setattr__(self, "points", pts)
        else:
            n = len(self.adjacency)
            if n == 0:
                raise GroupingError("graph must have at least one node")
            for u, nbrs in enumerate(self.adjacency):
                for v in nbrs:
                    if not 0 <= v < n:
                        raise GroupingError(f"node id {v} out of range [0, {n})")
                    if v == u:
                        raise GroupingError(f"self-loop at node {u}")

    @classmethod
    def from_points(cls, points) -> "AuxInfo":
        return cls(points=np.asarray(points, dtype=float))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "AuxInfo":
        """Undirected graph on ``n`` nodes; duplicate edges are collapsed."""
        nbrs: list[list[int]] = [[] for _ in range(n)]
        seen = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                raise GroupingError(f"self-loop at node {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise GroupingError(f"edge ({u}, {v}) out of range for n={n}")
            key = (min(u, v), max(u, v))
            if key in seen:
                continue
            seen.add(key)
            nbrs[u].append(v)
            nbrs[v].append(u)
        return cls(adjacency=tuple(tuple(x) for x in nbrs))

    @property
    def n(self) -> int:
        return self.points.shape[0] if self.points is not None else len(self.adjacency)

    @property
    def kind(self) -> str:
        return "points" if self.points is not None else "graph"


@dataclass(frozen=True, eq=False)
class GroupAssignment:
    """Per-owner groups stored in CSR form: ``G_i = indices[indptr[i]:indptr[i+1]]``.

    Members keep the order they were given in; groups produced by
    :func:`compute_groups` are ascending.
    """

    indptr: np.ndarray
    indices: np.ndarray
    threshold_r: float | None = None
    metric: str = "explicit"
    symmetric: bool = field(default=False, repr=False)

    def __post_init__(self):
        indptr = np.asarray(self.indptr, dtype=np.int64)
        indices = np.asarray(self.indices, dtype=np.int64)
        n = indptr.size - 1
        if n < 1:
            raise GroupingError("empty dataset")
        if indices.size and (indices.min() < 0 or indices.max() >= n):
            raise GroupingError("group member out of range")
        sizes = np.diff(indptr)
        if np.any(sizes < 1):
            raise GroupingError("every group must contain its owner")
        owner = np.repeat(np.arange(n), sizes)
        has_self = np.zeros(n, dtype=bool)
        has_self[owner[indices == owner]] = True
        if not has_self.all():
            missing = int(np.flatnonzero(~has_self)[0])
            raise GroupingError(f"group {missing} does not contain its owner")
        for arr in (indptr, indices):
            arr.flags.writeable = False
        object.__setattr__(self, "indptr", indptr)
        object.__setattr__(self, "indices", indices)

    @classmethod
    def from_groups(
        cls, groups: Sequence[Iterable[int]], *, one_based: bool = False, **kw
    ) -> "GroupAssignment":
        rows = [[int(v) - (1 if one_based else 0) for v in g] for g in groups]
        clean = []
        for row in rows:
            seen: dict[int, None] = {}
            for v in row:
                seen.setdefault(v, None)
            clean.append(list(seen))
        indptr = np.zeros(len(clean) + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([len(r) for r in clean])
        indices = np.array([v for r in clean for v in r], dtype=np.int64)
        return cls(indptr, indices, **kw)

    @classmethod
    def singletons(cls, n: int) -> "GroupAssignment":
        return cls(np.arange(n + 1), np.arange(n), threshold_r=0.0, symmetric=True)

    @classmethod
    def full(cls, n: int) -> "GroupAssignment":
        indptr = np.arange(n + 1) * n
        return cls(indptr, np.tile(np.arange(n), n), threshold_r=math.inf, symmetric=True)

    @property
    def n(self) -> int:
        return self.indptr.size - 1

    def group(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def sizes(self) -> np.ndarray:
        return np.diff(self.indptr)

    def as_sets(self) -> list[frozenset[int]]:
        return [frozenset(self.group(i).tolist()) for i in range(self.n)]

    def distinct_groups(self) -> list[tuple[int, ...]]:
        """Distinct member sets, each as a sorted tuple, in first-seen order."""
        seen: dict[tuple[int, ...], None] = {}
        for i in range(self.n):
            seen.setdefault(tuple(sorted(self.group(i).tolist())), None)
        return list(seen)

    def is_symmetric(self) -> bool:
        sets = self.as_sets()
        return all(i in sets[j] for i in range(self.n) for j in sets[i])

    def to_jsonl(self) -> str:
        lines = [
            json.dumps({"i": i, "members": sorted(self.group(i).tolist())})
            for i in range(self.n)
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "GroupAssignment":
        rows: dict[int, list[int]] = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                rows[int(rec["i"])] = [int(v) for v in rec["members"]]
            except (ValueError, KeyError, TypeError) as exc:
                raise GroupingError(f"line {lineno}: bad group record") from exc
        n = len(rows)
        if sorted(rows) != list(range(n)):
            raise GroupingError("group records must cover owners 0..n-1 exactly once")
        return cls.from_groups([rows[i] for i in range(n)])

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(self.indptr.tobytes())
        h.update(self.indices.tobytes())
        return h.hexdigest()


def _point_groups(points: np.ndarray, r: float, metric: str) -> tuple[np.ndarray, np.ndarray]:
    n = points.shape[0]
    if math.isinf(r):
        return np.arange(n + 1) * n, np.tile(np.arange(n), n)
    chunk = max(1, _DISTANCE_CHUNK_ELEMENTS // max(n, 1))
    counts = np.empty(n, dtype=np.int64)
    parts = []
    for start in range(0, n, chunk):
        block = points[start:start + chunk]
        diff = block[:, None, :] - points[None, :, :]
        if metric == "euclidean":
            dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        else:
            dist = np.abs(diff).sum(axis=2)
        mask = dist <= r
        counts[start:start + block.shape[0]] = mask.sum(axis=1)
        parts.append(np.nonzero(mask)[1])
    indptr = np.zeros(n + 1, dtype=np.int64)
    indptr[1:] = np.cumsum(counts)
    return indptr, np.concatenate(parts).astype(np.int64)


def _graph_groups(adjacency, r: float) -> tuple[np.ndarray, np.ndarray]:
    n = len(adjacency)
    if math.isinf(r):
        return np.arange(n + 1) * n, np.tile(np.arange(n), n)
    depth_limit = math.floor(r)
    rows = []
    for src in range(n):
        dist = {src: 0}
        queue = deque([src])
        while queue:
            u = queue.popleft()
            if dist[u] == depth_limit:
                continue
            for v in adjacency[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        rows.append(sorted(dist))
    indptr = np.zeros(n + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([len(x) for x in rows])
    return indptr, np.fromiter((v for x in rows for v in x), dtype=np.int64, count=int(indptr[-1]))


def compute_groups(aux: AuxInfo, r: float, metric: str | None = None) -> GroupAssignment:
    """``G_i = {j : d(t_i, t_j) <= r}``.

    Graph data uses unweighted shortest-path hop counts; point data uses
    Euclidean (default) or Manhattan distance.  ``r = inf`` puts everyone in
    every group, including across disconnected graph components.
    """
    r = float(r)
    if r < 0 or math.isnan(r):
        raise GroupingError(f"threshold r must be >= 0, got {r}")
    if aux.kind == "graph":
        if metric not in (None, GRAPH_METRIC):
            raise GroupingError(f"graph auxiliary data only supports metric {GRAPH_METRIC!r}")
        indptr, indices = _graph_groups(aux.adjacency, r)
        metric = GRAPH_METRIC
    else:
        metric = metric or "euclidean"
        if metric not in POINT_METRICS:
            raise GroupingError(f"unknown point metric {metric!r}; choose from {POINT_METRICS}")
        indptr, indices = _point_groups(aux.points, r, metric)
    return GroupAssignment(indptr, indices, threshold_r=r, metric=metric, symmetric=True)


@dataclass(frozen=True, eq=False)
class GroupGraph:
    """Undirected graph in CSR form; ``indices`` rows hold neighbour lists."""

    indptr: np.ndarray
    indices: np.ndarray

    @property
    def n(self) -> int:
        return self.indptr.size - 1

    @property
    def n_edges(self) -> int:
        return int(self.indices.size // 2)

    def neighbors(self, u: int) -> np.ndarray:
        return self.indices[self.indptr[u]:self.indptr[u + 1]]

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def sorted(self) -> "GroupGraph":
        """Same graph with every neighbour list in ascending order."""
        owner = np.repeat(np.arange(self.n), self.degrees())
        order = np.lexsort((self.indices, owner))
        return GroupGraph(self.indptr, self.indices[order])


def build_group_graph(g: GroupAssignment) -> GroupGraph:
    """Edge ``(i, j)`` for every ``j`` in ``G_i`` with ``j != i``, made undirected.

    Neighbour lists keep the members' listed order, followed by any node that
    only lists ``i`` from its own side.
    """
    n = g.n
    owner = np.repeat(np.arange(n), g.sizes())
    keep = g.indices != owner
    src, dst = owner[keep], g.indices[keep]
    if not g.symmetric:
        src, dst = np.concatenate([src, dst]), np.concatenate([dst, src])
        key = src * n + dst
        _, first = np.unique(key, return_index=True)
        first.sort()
        src, dst = src[first], dst[first]
    order = np.argsort(src, kind="stable")
    src, dst = src[order], dst[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    indptr[1:] = np.cumsum(np.bincount(src, minlength=n))
    return GroupGraph(indptr, dst.astype(np.int64))


def select_root(g: GroupAssignment) -> int:
    """Owner with the largest group; lowest index wins ties."""
    return int(np.argmax(g.sizes()))


def bfs_reference(graph: GroupGraph, root: int, tie_break: str = "ascending") -> Permutation:
    """BFS visit order from ``root`` as a permutation (``sigma0[k]`` = k-th visited).

    ``tie_break="ascending"`` enqueues unvisited neighbours by increasing
    index; ``"listed"`` keeps the neighbour-list order from the grouping.
    Unreached components are traversed afterwards, smallest node first.
    """
    if tie_break not in TIE_BREAKS:
        raise GroupingError(f"unknown tie_break {tie_break!r}; choose from {TIE_BREAKS}")
    if not 0 <= root < graph.n:
        raise GroupingError(f"root {root} out of range")
    if tie_break == "ascending":
        graph = graph.sorted()
    order = kernels.bfs_order(graph.indptr, graph.indices, int(root))
    return Permutation(order, _trusted=True)


def group_widths(sigma: Permutation, g: GroupAssignment) -> np.ndarray:
    """Per-group spread ``max - min`` of member positions in ``sigma``."""
    if sigma.n != g.n:
        raise GroupingError(f"size mismatch: permutation {sigma.n} vs grouping {g.n}")
    pos = inverse(sigma).mapping[g.indices]
    starts = g.indptr[:-1]
    return np.maximum.reduceat(pos, starts) - np.minimum.reduceat(pos, starts)


def width(sigma: Permutation, g: GroupAssignment) -> int:
    return int(group_widths(sigma, g).max())


def kendall_sensitivity(omega: int) -> float:
    return omega * (omega + 1) / 2


def enumerated_sensitivity(
    sigma0: Permutation, g: GroupAssignment, rank_distance: str, *, orientation: str = "item"
) -> float:
    """Brute-force sensitivity over all neighbouring pairs.

    Evaluates ``max |d(compose(sigma0, s), sigma0) - d(compose(sigma0, s'), sigma0)|``
    over every ``s`` and every ``s'`` agreeing with ``s`` outside some group.
    Pairs sharing the values outside a group form one class, so the maximum
    is taken as ``max - min`` of the distance within each class.

    ``orientation="item"`` measures Kendall's tau between item orders (the
    sampler's distance); ``"position"`` uses the index-pair form and exists
    only to show that it does not respect the width bound.
    """
    n = g.n
    if rank_distance not in RANK_DISTANCES:
        raise GroupingError(f"unknown rank distance {rank_distance!r}")
    limit = MAX_HAMMING_ENUMERATION_N
    if n > limit:
        raise GroupingError(f"enumerated sensitivity is limited to n <= {limit}, got n={n}")
    perms = all_permutations_array(n)
    s0 = sigma0.mapping
    s0_inv = inverse(sigma0).mapping
    moved = perms[:, s0]  # compose(sigma0, s)
    if rank_distance == "hamming":
        dist = np.count_nonzero(moved != s0[None, :], axis=1)
    elif orientation == "item":
        dist = inversions_batch(s0_inv[moved])
    elif orientation == "position":
        dist = inversions_batch(moved[:, s0_inv])
    else:
        raise GroupingError(f"unknown orientation {orientation!r}")
    best = 0
    weights = n ** np.arange(n, dtype=np.int64)
    for members in g.distinct_groups():
        outside = np.setdiff1d(np.arange(n), members)
        if outside.size == 0:
            best = max(best, int(dist.max() - dist.min()))
            continue
        key = perms[:, outside] @ weights[: outside.size]
        _, cls = np.unique(key, return_inverse=True)
        hi = np.full(cls.max() + 1, -1, dtype=np.int64)
        lo = np.full(cls.max() + 1, np.iinfo(np.int64).max, dtype=np.int64)
        np.maximum.at(hi, cls, dist)
        np.minimum.at(lo, cls, dist)
        best = max(best, int((hi - lo).max()))
    return float(best)


def sensitivity(sigma0: Permutation, g: GroupAssignment, rank_distance: str = "kendall") -> float:
    """Kendall's tau: ``w (w + 1) / 2`` with ``w = width(sigma0, g)``.

    Hamming has no closed form here and is enumerated (``n <= 8``).
    """
    if rank_distance == "kendall":
        return kendall_sensitivity(width(sigma0, g))
    if rank_distance == "hamming":
        if g.n > MAX_HAMMING_ENUMERATION_N:
            raise GroupingError(
                f"Hamming sensitivity is enumerated and supports n <= "
                f"{MAX_HAMMING_ENUMERATION_N}, got n={g.n}"
            )
        return enumerated_sensitivity(sigma0, g, "hamming")
    raise GroupingError(f"unknown rank distance {rank_distance!r}; choose from {RANK_DISTANCES}")


@dataclass(frozen=True, eq=False)
class ShufflePlan:
    """Everything the shuffler needs that does not depend on the data.

    ``theta`` is ``inf`` when the sensitivity is zero (every group a
    singleton): the mechanism then releases the data unshuffled.
    """

    assignment: GroupAssignment
    sigma0: Permutation
    width: int
    sensitivity: float
    theta: float
    alpha: float
    rank_distance: str = "kendall"
    tie_break: str = "ascending"

    @property
    def n(self) -> int:
        return self.sigma0.n

    @property
    def is_identity(self) -> bool:
        return math.isinf(self.theta)

    def with_theta(self, theta: float) -> "ShufflePlan":
        """Same plan with ``theta`` forced; ``alpha`` becomes ``theta * sensitivity``."""
        if theta < 0:
            raise GroupingError("theta must be >= 0")
        alpha = theta * self.sensitivity if self.sensitivity > 0 else 0.0
        return ShufflePlan(
            self.assignment, self.sigma0, self.width, self.sensitivity,
            float(theta), float(alpha), self.rank_distance, self.tie_break,
        )

    def summary(self) -> dict:
        return {
            "n": self.n,
            "alpha": self.alpha,
            "theta": None if self.is_identity else self.theta,
            "identity_shuffle": self.is_identity,
            "width": self.width,
            "sensitivity": self.sensitivity,
            "rank_distance": self.rank_distance,
            "tie_break": self.tie_break,
            "threshold_r": self.assignment.threshold_r,
            "metric": self.assignment.metric,
            "max_group_size": int(self.assignment.sizes().max()),
            "plan_digest": self.digest(),
        }

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(self.assignment.digest().encode())
        h.update(self.sigma0.mapping.tobytes())
        h.update(json.dumps(
            [self.width, self.sensitivity, repr(self.theta), repr(self.alpha),
             self.rank_distance, self.tie_break]
        ).encode())
        return h.hexdigest()


def plan_from_assignment(
    g: GroupAssignment,
    alpha: float,
    rank_distance: str = "kendall",
    tie_break: str = "ascending",
) -> ShufflePlan:
    """Build the reference permutation and calibrate ``theta = alpha / sensitivity``."""
    alpha = float(alpha)
    if alpha < 0 or math.isnan(alpha):
        raise GroupingError(f"alpha must be >= 0, got {alpha}")
    if rank_distance not in RANK_DISTANCES:
        raise GroupingError(f"unknown rank distance {rank_distance!r}; choose from {RANK_DISTANCES}")
    root = select_root(g)
    if int(g.sizes().min()) == g.n:
        # complete graph: BFS visits the root, then every other node at once
        if tie_break not in TIE_BREAKS:
            raise GroupingError(f"unknown tie_break {tie_break!r}; choose from {TIE_BREAKS}")
        rest = g.group(root)
        rest = rest[rest != root]
        if tie_break == "ascending":
            rest = np.sort(rest)
        sigma0 = Permutation(np.concatenate([[root], rest]), _trusted=True)
    else:
        sigma0 = bfs_reference(build_group_graph(g), root, tie_break)
    omega = width(sigma0, g)
    delta = sensitivity(sigma0, g, rank_distance)
    theta = alpha / delta if delta > 0 else math.inf
    return ShufflePlan(g, sigma0, omega, delta, theta, alpha, rank_distance, tie_break)


def make_plan(
    aux: AuxInfo,
    r: float,
    alpha: float,
    metric: str | None = None,
    rank_distance: str = "kendall",
    tie_break: str = "ascending",
) -> ShufflePlan:
    return plan_from_assignment(compute_groups(aux, r, metric), alpha, rank_distance, tie_break)


def identity_plan(n: int) -> ShufflePlan:
    """Plan that never shuffles: singleton groups, zero sensitivity."""
    return plan_from_assignment(GroupAssignment.singletons(n), 0.0)


def uniform_plan(n: int) -> ShufflePlan:
    """Uniform random shuffling: one group holding everyone, ``theta = 0``."""
    g = GroupAssignment.full(n)
    return ShufflePlan(g, identity(n), n - 1, kendall_sensitivity(n - 1), 0.0, 0.0)


def transferred_alpha(plan: ShufflePlan, g2: GroupAssignment) -> float:
    """Privacy level the same plan gives under another grouping ``g2``."""
    if plan.sensitivity <= 0:
        raise GroupingError("base plan has zero sensitivity; the ratio is undefined")
    return plan.alpha * sensitivity(plan.sigma0, g2, plan.rank_distance) / plan.sensitivity
