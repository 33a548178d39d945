"""Pure-Python implementations of the bitmask-DP kernels.

These mirror ``_kernels.pyx`` exactly (same results, same tie-breaking) and
are used when the compiled extension is unavailable.  They are written
against numpy where it helps, but the subset loops are inherently serial;
expect roughly two orders of magnitude less throughput than the compiled
backend (see ``benchmarks/bench_kernels.py``).
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "pure"


def held_karp_cycle(dist: np.ndarray) -> tuple[float, list[int]]:
    """Optimal Hamiltonian cycle through all rows of ``dist``.

    Returns (cost, order) with the order starting at vertex 0.  Ties are
    broken toward the smaller predecessor/last-vertex index so that both
    backends produce identical tours.
    """
    dist = np.asarray(dist, dtype=np.float64)
    p = dist.shape[0]
    if p == 1:
        return 0.0, [0]
    if p == 2:
        return float(dist[0, 1] + dist[1, 0]), [0, 1]

    full = 1 << p
    inf = np.inf
    dp = np.full((full, p), inf)
    parent = np.full((full, p), -1, dtype=np.int16)
    for j in range(1, p):
        dp[1 | (1 << j), j] = dist[0, j]
        parent[1 | (1 << j), j] = 0

    for mask in range(3, full, 2):  # masks containing vertex 0
        if mask.bit_count() < 3:
            continue
        prev_bits = [i for i in range(1, p) if mask >> i & 1]
        for j in prev_bits:
            pm = mask ^ (1 << j)
            cand = dp[pm, prev_bits] + dist[prev_bits, j]
            # dp[pm, j] is inf, so j never picks itself
            a = int(np.argmin(cand))
            if cand[a] < dp[mask, j]:
                dp[mask, j] = cand[a]
                parent[mask, j] = prev_bits[a]

    best_cost, best_j = inf, -1
    for j in range(1, p):
        c = dp[full - 1, j] + dist[j, 0]
        if c < best_cost:
            best_cost, best_j = c, j

    order = []
    mask, j = full - 1, best_j
    while j != -1:
        order.append(j)
        mask, j = mask ^ (1 << j), int(parent[mask, j])
    order.reverse()
    assert order[0] == 0
    return float(best_cost), order


def matching_min_cost(dist: np.ndarray) -> tuple[float, list[tuple[int, int]]]:
    """Minimum-cost perfect matching on an even vertex set, by subset DP.

    Exact; ties resolved toward the smallest partner index.
    """
    dist = np.asarray(dist, dtype=np.float64)
    p = dist.shape[0]
    if p == 0:
        return 0.0, []
    if p % 2:
        raise ValueError("perfect matching needs an even number of vertices")

    full = 1 << p
    dp = np.full(full, np.inf)
    dp[0] = 0.0
    choice = np.full(full, -1, dtype=np.int32)
    for mask in range(1, full):
        if mask.bit_count() % 2:
            continue
        v = (mask & -mask).bit_length() - 1
        base = mask ^ (1 << v)
        best, best_u = np.inf, -1
        u = base
        while u:
            ub = (u & -u).bit_length() - 1
            c = dp[mask ^ (1 << v) ^ (1 << ub)] + dist[v, ub]
            if c < best:
                best, best_u = c, ub
            u &= u - 1
        dp[mask] = best
        choice[mask] = best_u

    pairs = []
    mask = full - 1
    while mask:
        v = (mask & -mask).bit_length() - 1
        u = int(choice[mask])
        pairs.append((v, u))
        mask ^= (1 << v) | (1 << u)
    return float(dp[full - 1]), pairs


def cover_partition(
    n: int, block_masks: np.ndarray, block_costs: np.ndarray
) -> tuple[float, list[int]]:
    """Minimum-cost exact cover of {0..n-1} by the given blocks.

    dp over customer subsets; each subset is covered by choosing a block that
    contains its lowest set bit.  Returns (cost, chosen block indices).
    """
    block_masks = np.asarray(block_masks, dtype=np.int64)
    block_costs = np.asarray(block_costs, dtype=np.float64)
    by_member: list[list[int]] = [[] for _ in range(n)]
    for idx, bm in enumerate(block_masks):
        v = (int(bm) & -int(bm)).bit_length() - 1
        # register the block under every member: lookup is by lowest bit of
        # the *remaining* set, which need not be the block's own lowest bit
        m = int(bm)
        while m:
            by_member[(m & -m).bit_length() - 1].append(idx)
            m &= m - 1

    full = 1 << n
    dp = np.full(full, np.inf)
    dp[0] = 0.0
    choice = np.full(full, -1, dtype=np.int64)
    for mask in range(1, full):
        v = (mask & -mask).bit_length() - 1
        best, best_b = np.inf, -1
        for b in by_member[v]:
            bm = int(block_masks[b])
            if bm & ~mask:
                continue
            c = block_costs[b] + dp[mask ^ bm]
            if c < best:
                best, best_b = c, b
        dp[mask] = best
        choice[mask] = best_b

    if not np.isfinite(dp[full - 1]):
        raise ValueError("blocks do not cover the universe")
    chosen = []
    mask = full - 1
    while mask:
        b = int(choice[mask])
        chosen.append(b)
        mask ^= int(block_masks[b])
    return float(dp[full - 1]), chosen
