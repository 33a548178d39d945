"""Spanning trees, exact matchings, Hamiltonian cycles and shortcutting.

Everything here works on integer vertex indices into a dense weight matrix,
so the same functions serve the original graph and the reduced single-depot
graph.  All outputs are deterministic: ties are broken by vertex / edge index.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import _backend
from .errors import BudgetExceededError

EXACT_TSP_BUDGET = 16


@dataclass(frozen=True)
class WeightedTree:
    """A spanning tree on a declared vertex set."""

    vertices: tuple
    edges: tuple  # ((i, j, weight), ...)
    cost: float


@dataclass(frozen=True)
class HamCycle:
    """A Hamiltonian cycle as a cyclic vertex sequence (not closed in ``order``)."""

    order: tuple
    cost: float

    def __len__(self) -> int:
        return len(self.order)


def cycle_cost(weights: np.ndarray, order: Sequence[int]) -> float:
    idx = list(order)
    if len(idx) <= 1:
        return 0.0
    return float(sum(weights[a, b] for a, b in zip(idx, idx[1:] + idx[:1])))


def kruskal(vertices: Sequence[int], edges: Iterable[tuple[int, int, float]]) -> WeightedTree:
    """Minimum spanning tree from an explicit edge list.

    Edges are taken in (weight, i, j) order, which makes tie-breaking
    lexicographic in the edge index.
    """
    verts = list(vertices)
    parent = {v: v for v in verts}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    chosen = []
    cost = 0.0
    for w, i, j in sorted((float(w), i, j) for i, j, w in edges):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
            chosen.append((i, j, w))
            cost += w
            if len(chosen) == len(verts) - 1:
                break
    if len(chosen) != len(verts) - 1:
        raise ValueError("edge set does not connect the vertex set")
    return WeightedTree(vertices=tuple(verts), edges=tuple(chosen), cost=cost)


def mst(weights: np.ndarray, vertices: Sequence[int]) -> WeightedTree:
    """Minimum spanning tree over the given vertices of a dense matrix."""
    verts = list(vertices)
    if not verts:
        raise ValueError("mst needs at least one vertex")
    edges = [
        (verts[a], verts[b], float(weights[verts[a], verts[b]]))
        for a in range(len(verts))
        for b in range(a + 1, len(verts))
    ]
    return kruskal(verts, edges)


def min_perfect_matching(
    weights: np.ndarray, vertices: Sequence[int]
) -> list[tuple[int, int]]:
    """Exact minimum-weight perfect matching on an even-sized vertex set."""
    verts = list(vertices)
    if len(verts) % 2:
        raise ValueError("perfect matching needs an even vertex count")
    if not verts:
        return []
    sub = np.asarray(weights, dtype=float)[np.ix_(verts, verts)]
    _, pairs = _backend.matching_min_cost(sub)
    return [(verts[a], verts[b]) for a, b in pairs]


def exact_tsp_small(weights: np.ndarray, vertices: Sequence[int]) -> HamCycle:
    """Optimal Hamiltonian cycle by subset dynamic programming (<= 16 vertices)."""
    verts = list(vertices)
    p = len(verts)
    if p < 1:
        raise ValueError("exact_tsp_small needs at least one vertex")
    if p > EXACT_TSP_BUDGET:
        raise BudgetExceededError(
            f"{p} vertices exceed the exact TSP budget of {EXACT_TSP_BUDGET}",
            size=p,
            budget=EXACT_TSP_BUDGET,
        )
    if p == 1:
        return HamCycle(order=(verts[0],), cost=0.0)
    sub = np.asarray(weights, dtype=float)[np.ix_(verts, verts)]
    cost, order = _backend.held_karp_cycle(sub)
    return HamCycle(order=tuple(verts[i] for i in order), cost=float(cost))


def shortcut(walk: Sequence[int], keep: Iterable[int]) -> list[int]:
    """First-occurrence subsequence of ``walk`` restricted to ``keep``.

    If the walk is closed, the output is closed too.  Under a semi-metric the
    cost never increases.
    """
    keep = set(keep)
    seen = set()
    out = []
    for v in walk:
        if v in keep and v not in seen:
            out.append(v)
            seen.add(v)
    if len(walk) > 1 and walk[0] == walk[-1] and out and out[0] == walk[0]:
        out.append(out[0])
    return out


def euler_circuit(multi_edges: Iterable[tuple[int, int]], start: int) -> list[int]:
    """Closed Euler walk on a connected even-degree multigraph (Hierholzer).

    Deterministic: the lowest-numbered available neighbor is taken first.
    """
    adj: dict[int, list] = {}
    for eid, (a, b) in enumerate(multi_edges):
        adj.setdefault(a, []).append([b, eid])
        adj.setdefault(b, []).append([a, eid])
    for v in adj:
        adj[v].sort(key=lambda e: e[0], reverse=True)  # pop() takes lowest
    used = set()
    stack = [start]
    trail = []
    while stack:
        v = stack[-1]
        bucket = adj.get(v, [])
        while bucket and bucket[-1][1] in used:
            bucket.pop()
        if bucket:
            to, eid = bucket.pop()
            used.add(eid)
            stack.append(to)
        else:
            trail.append(stack.pop())
    trail.reverse()
    return trail


def christofides(weights: np.ndarray, vertices: Sequence[int]) -> HamCycle:
    """3/2-approximate Hamiltonian cycle: MST + exact matching on odd vertices.

    The matching is exact, so the 1.5 bound against the optimal cycle holds
    on every semi-metric input.
    """
    verts = sorted(vertices)
    if len(verts) < 3:
        raise ValueError("christofides needs at least 3 vertices")
    tree = mst(weights, verts)
    degree = {v: 0 for v in verts}
    for i, j, _ in tree.edges:
        degree[i] += 1
        degree[j] += 1
    odd = [v for v in verts if degree[v] % 2]
    matching = min_perfect_matching(weights, odd)

    multi = [(i, j) for i, j, _ in tree.edges] + list(matching)
    walk = euler_circuit(multi, start=verts[0])
    order = shortcut(walk, verts)[:-1]  # drop the closing repeat
    return HamCycle(order=tuple(order), cost=cycle_cost(weights, order))


def shortcut_cycle(weights: np.ndarray, cycle: HamCycle, keep: Iterable[int]) -> HamCycle:
    """Restrict a Hamiltonian cycle to a vertex subset, preserving cyclic order."""
    keep = set(keep)
    order = tuple(v for v in cycle.order if v in keep)
    return HamCycle(order=order, cost=cycle_cost(weights, order))
