# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; same contracts as ``dsigma._pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.string cimport memmove
from libc.stdlib cimport malloc, free

cnp.import_array()


def rim_insert(offsets):
    cdef cnp.int64_t[:, ::1] off = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef Py_ssize_t count = off.shape[0]
    cdef Py_ssize_t n = off.shape[1]
    out = np.empty((count, n), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] res = out
    cdef Py_ssize_t r, i, pos
    cdef cnp.int64_t* row
    for r in range(count):
        row = &res[r, 0]
        for i in range(n):
            pos = i - off[r, i]
            if pos < i:
                memmove(row + pos + 1, row + pos, (i - pos) * sizeof(cnp.int64_t))
            row[pos] = i
    return out


def count_inversions(values):
    cdef cnp.int64_t[::1] v = np.ascontiguousarray(values, dtype=np.int64)
    cdef Py_ssize_t n = v.shape[0]
    if n < 2:
        return 0
    # Fenwick tree over values 0..n-1, scanning right to left
    cdef cnp.int64_t* tree = <cnp.int64_t*> malloc((n + 1) * sizeof(cnp.int64_t))
    if tree == NULL:
        raise MemoryError()
    cdef Py_ssize_t i, j
    cdef cnp.int64_t total = 0, s
    for i in range(n + 1):
        tree[i] = 0
    for i in range(n - 1, -1, -1):
        j = v[i]
        s = 0
        while j > 0:
            s += tree[j]
            j -= j & (-j)
        total += s
        j = v[i] + 1
        while j <= n:
            tree[j] += 1
            j += j & (-j)
    free(tree)
    return int(total)


def bfs_order(indptr, indices, Py_ssize_t root):
    cdef cnp.int64_t[::1] ptr = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef cnp.int64_t[::1] idx = np.ascontiguousarray(indices, dtype=np.int64)
    cdef Py_ssize_t n = ptr.shape[0] - 1
    visited_arr = np.zeros(n, dtype=np.uint8)
    cdef cnp.uint8_t[::1] visited = visited_arr
    order_arr = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] order = order_arr
    cdef Py_ssize_t head = 0, tail = 0, next_start = 0, start = root
    cdef Py_ssize_t u, k, w
    while tail < n:
        if head == tail:
            if visited[start]:
                while visited[next_start]:
                    next_start += 1
                start = next_start
            visited[start] = 1
            order[tail] = start
            tail += 1
        u = order[head]
        head += 1
        for k in range(ptr[u], ptr[u + 1]):
            w = idx[k]
            if not visited[w]:
                visited[w] = 1
                order[tail] = w
                tail += 1
    return order_arr
