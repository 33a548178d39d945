# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled bitmask-DP kernels: exact TSP, exact matching, exact set cover.

Semantics (including tie-breaking) are shared with ``_kernels_py``; the
equivalence is pinned by tests/test_kernels.py.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND_NAME = "compiled"

cdef double INF = float("inf")


def held_karp_cycle(dist_in):
    """Optimal Hamiltonian cycle over all rows of ``dist_in``; order starts at 0."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] dist = np.ascontiguousarray(dist_in, dtype=np.float64)
    cdef int p = dist.shape[0]
    if p == 1:
        return 0.0, [0]
    if p == 2:
        return float(dist[0, 1] + dist[1, 0]), [0, 1]

    cdef long full = 1 << p
    cdef cnp.ndarray[cnp.float64_t, ndim=2] dp = np.full((full, p), INF)
    cdef cnp.ndarray[cnp.int16_t, ndim=2] parent = np.full((full, p), -1, dtype=np.int16)
    cdef long mask, pm
    cdef int i, j
    cdef double best, c

    for j in range(1, p):
        dp[1 | (1 << j), j] = dist[0, j]
        parent[1 | (1 << j), j] = 0

    for mask in range(3, full, 2):
        for j in range(1, p):
            if not (mask >> j) & 1:
                continue
            pm = mask ^ (1 << j)
            if pm == 1:
                continue  # base case already filled
            best = dp[mask, j]
            for i in range(1, p):
                if not (pm >> i) & 1:
                    continue
                c = dp[pm, i] + dist[i, j]
                if c < best:
                    best = c
                    parent[mask, j] = i
            dp[mask, j] = best

    cdef double best_cost = INF
    cdef int best_j = -1
    for j in range(1, p):
        c = dp[full - 1, j] + dist[j, 0]
        if c < best_cost:
            best_cost = c
            best_j = j

    order = []
    mask = full - 1
    j = best_j
    while j != -1:
        order.append(j)
        pm = mask ^ (1 << j)
        j = parent[mask, j]
        mask = pm
    order.reverse()
    return float(best_cost), order


def matching_min_cost(dist_in):
    """Minimum-cost perfect matching on an even vertex set, by subset DP."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] dist = np.ascontiguousarray(dist_in, dtype=np.float64)
    cdef int p = dist.shape[0]
    if p == 0:
        return 0.0, []
    if p % 2:
        raise ValueError("perfect matching needs an even number of vertices")

    cdef long full = 1 << p
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dp = np.full(full, INF)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] choice = np.full(full, -1, dtype=np.int32)
    dp[0] = 0.0
    cdef long mask, rest
    cdef int v, u, bits
    cdef double best, c

    for mask in range(1, full):
        bits = 0
        rest = mask
        while rest:
            bits += 1
            rest &= rest - 1
        if bits & 1:
            continue
        v = 0
        while not (mask >> v) & 1:
            v += 1
        best = INF
        for u in range(v + 1, p):
            if not (mask >> u) & 1:
                continue
            c = dp[mask ^ (1 << v) ^ (1 << u)] + dist[v, u]
            if c < best:
                best = c
                choice[mask] = u
        dp[mask] = best

    pairs = []
    mask = full - 1
    while mask:
        v = 0
        while not (mask >> v) & 1:
            v += 1
        u = choice[mask]
        pairs.append((v, u))
        mask ^= (1 << v) | (1 << u)
    return float(dp[full - 1]), pairs


def cover_partition(int n, masks_in, costs_in):
    """Minimum-cost exact cover of {0..n-1}; returns (cost, chosen block indices)."""
    cdef cnp.ndarray[cnp.int64_t, ndim=1] block_masks = np.ascontiguousarray(masks_in, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] block_costs = np.ascontiguousarray(costs_in, dtype=np.float64)
    cdef long nb = block_masks.shape[0]

    # flatten the member -> blocks index
    counts = np.zeros(n, dtype=np.int64)
    cdef long idx, m
    for idx in range(nb):
        m = block_masks[idx]
        while m:
            counts[(m & -m).bit_length() - 1] += 1
            m &= m - 1
    offs = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=offs[1:])
    cdef cnp.ndarray[cnp.int64_t, ndim=1] offsets = offs
    cdef cnp.ndarray[cnp.int64_t, ndim=1] entries = np.empty(offsets[n], dtype=np.int64)
    fill = offsets[:n].copy()
    cdef cnp.ndarray[cnp.int64_t, ndim=1] pos = fill
    cdef int v
    for idx in range(nb):
        m = block_masks[idx]
        while m:
            v = (m & -m).bit_length() - 1
            entries[pos[v]] = idx
            pos[v] += 1
            m &= m - 1

    cdef long full = 1 << n
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dp = np.full(full, INF)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] choice = np.full(full, -1, dtype=np.int64)
    dp[0] = 0.0
    cdef long mask, bm, e
    cdef long b
    cdef double best, c
    for mask in range(1, full):
        v = 0
        while not (mask >> v) & 1:
            v += 1
        best = INF
        for e in range(offsets[v], offsets[v + 1]):
            b = entries[e]
            bm = block_masks[b]
            if bm & ~mask:
                continue
            c = block_costs[b] + dp[mask ^ bm]
            if c < best:
                best = c
                choice[mask] = b
        dp[mask] = best

    if dp[full - 1] == INF:
        raise ValueError("blocks do not cover the universe")
    chosen = []
    mask = full - 1
    while mask:
        b = choice[mask]
        chosen.append(int(b))
        mask ^= block_masks[b]
    return float(dp[full - 1]), chosen
