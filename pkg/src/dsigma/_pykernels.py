"""Pure-Python/numpy implementations of the hot kernels.

Used whenever the compiled ``_ckernels`` extension is unavailable, and kept
as the reference the compiled versions are tested against.
"""

from __future__ import annotations

import numpy as np


def rim_insert(offsets):
    """Build permutations from repeated-insertion offsets.

    Row ``r`` of ``offsets`` holds, for each item ``i``, the number of
    already placed items that end up after item ``i`` when it is inserted
    (``0 <= offsets[r, i] <= i``).
    """
    offsets = np.ascontiguousarray(offsets, dtype=np.int64)
    count, n = offsets.shape
    out = np.empty((count, n), dtype=np.int64)
    for r in range(count):
        row = offsets[r].tolist()
        perm: list[int] = []
        for i, v in enumerate(row):
            perm.insert(i - v, i)
        out[r] = perm
    return out


def count_inversions(values) -> int:
    """Number of pairs ``a < b`` with ``values[a] > values[b]``.

    ``values`` must be a permutation of ``0..n-1``.  Bottom-up merge sort,
    vectorised per level with ``searchsorted`` on block-offset keys.
    """
    arr = np.asarray(values, dtype=np.int64)
    n = arr.size
    if n < 2:
        return 0
    total = 0
    width = 1
    idx = np.arange(n)
    cur = arr.copy()
    while width < n:
        block = idx // (2 * width)
        in_right = (idx // width) % 2 == 1
        # cur is sorted within blocks of size `width`; shift keys by block id
        keys = block * n + cur
        left_keys = keys[~in_right]
        right_keys = keys[in_right]
        right_block = block[in_right]
        # left_keys is globally sorted: blocks ascend and each half is sorted
        pos = np.searchsorted(left_keys, right_keys, side="right")
        left_end = np.searchsorted(left_keys, (right_block + 1) * n, side="left")
        total += int(np.sum(left_end - pos))
        cur = np.sort(keys) % n
        width *= 2
    return total


def bfs_order(indptr, indices, root: int):
    """Breadth-first visit order over a CSR adjacency structure.

    Neighbours are enqueued in the order they appear in ``indices``.  Nodes
    unreachable from ``root`` are started in ascending order of index.
    """
    indptr = np.asarray(indptr, dtype=np.int64)
    indices = np.asarray(indices, dtype=np.int64)
    n = indptr.size - 1
    visited = np.zeros(n, dtype=bool)
    order = np.empty(n, dtype=np.int64)
    head = 0
    tail = 0
    next_start = 0
    start = root
    while tail < n:
        if head == tail:
            if visited[start]:
                while visited[next_start]:
                    next_start += 1
                start = next_start
            visited[start] = True
            order[tail] = start
            tail += 1
        u = order[head]
        head += 1
        nbrs = indices[indptr[u]:indptr[u + 1]]
        fresh = nbrs[~visited[nbrs]]
        if fresh.size:
            # a neighbour may be listed twice; keep first occurrence only
            _, first = np.unique(fresh, return_index=True)
            if first.size != fresh.size:
                fresh = fresh[np.sort(first)]
            visited[fresh] = True
            order[tail:tail + fresh.size] = fresh
            tail += fresh.size
    return order
