"""Combinatorial partition algorithms on the reduced and original graphs.

Two families:

* cycle partitioning - split a Hamiltonian cycle of the reduced graph into
  capacity-feasible segments (splittable or unsplittable flavor), then expand
  the segments back to real depots, repairing walks that would connect two
  different depots.  Cost certificates: ``(2/k)*delta + 2*c(C)`` splittable /
  unit, ``(4/k)*delta + 2*c(C)`` unsplittable with even capacity.

* tree partitioning - carve a constrained spanning forest into components of
  demand in (floor(k/2), k], each attached to its cheapest depot, doubling and
  shortcutting.  Cost certificate: ``2/(floor(k/2)+1)*delta + 2*c(T')`` where
  ``T'`` is the spanning tree used.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .instance import (
    Instance,
    Solution,
    SuperDepotView,
    Tour,
    make_tour,
    tour_weight,
)
from .tsp import HamCycle, WeightedTree, cycle_cost, euler_circuit, kruskal, shortcut

_EPS = 1e-9


# --------------------------------------------------------------------------
# segment filling along a cycle
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SegmentPlan:
    """Segments of a cycle with per-customer takes, for one cut phase.

    ``phase`` is the first cut position (in load units, in ``(0, capacity]``);
    a customer whose load straddles a cut appears in two adjacent segments.
    """

    phase: float
    segments: tuple  # ((customer index, take), ...) per segment
    total_cost: float


def fill_segments(
    order: Sequence[int], loads: Mapping[int, float], q: float, first_cut: float
) -> list[list[list]]:
    """Cut the customer sequence at load positions first_cut, first_cut+q, ...

    Every segment's total take is at most ``q``; interior segments are exactly
    ``q``.  Entries are ``[customer, take]`` with takes summing to each
    customer's load.
    """
    segs: list[list[list]] = []
    cur: list[list] = []
    placed = 0.0
    next_cut = float(first_cut)
    for v in order:
        rem = float(loads[v])
        while rem > _EPS:
            room = next_cut - placed
            if room <= _EPS:
                if cur:
                    segs.append(cur)
                    cur = []
                next_cut += q
                continue
            take = min(rem, room)
            cur.append([v, take])
            placed += take
            rem -= take
    if cur:
        segs.append(cur)
    return segs


def _segments_cost(c: np.ndarray, o: int, segs: Iterable[Sequence[Sequence]]) -> float:
    total = 0.0
    for seg in segs:
        vs = [v for v, _ in seg]
        total += c[o, vs[0]] + sum(c[a, b] for a, b in zip(vs, vs[1:])) + c[vs[-1], o]
    return float(total)


def _rotate_to(order: Sequence[int], v: int) -> list[int]:
    i = list(order).index(v)
    return list(order[i:]) + list(order[:i])


def best_itp_plan(
    view: SuperDepotView, cycle: HamCycle, capacity: int, customer_order: Sequence[int] | None = None
) -> SegmentPlan:
    """Best-of-all-phases exact-fill segmentation of the cycle.

    Tries every integer cut phase in ``1..capacity`` and keeps the cheapest
    plan (ties to the smaller phase).
    """
    c = view.reduced_weights
    o = view.o_index
    if customer_order is None:
        customer_order = _rotate_to(cycle.order, o)[1:]
    dem = view.instance.demand_array
    loads = {v: float(dem[v]) for v in customer_order}
    best: SegmentPlan | None = None
    for first_cut in range(1, capacity + 1):
        segs = fill_segments(customer_order, loads, float(capacity), float(first_cut))
        cost = _segments_cost(c, o, segs)
        if best is None or cost < best.total_cost - _EPS:
            best = SegmentPlan(
                phase=float(first_cut),
                segments=tuple(tuple((v, t) for v, t in s) for s in segs),
                total_cost=cost,
            )
    assert best is not None
    return best


def itp_split(
    view: SuperDepotView, cycle: HamCycle, capacity: int, variant: str = "splittable"
) -> Solution:
    """Iterated tour partitioning on the reduced graph (single depot).

    Splittable / unit demands; the output cost is at most
    ``(2/capacity)*delta + c(cycle)``.
    """
    if variant not in ("unit", "splittable"):
        raise ValueError("itp_split handles unit/splittable demands; see uitp_split")
    inst = view.instance
    if max(inst.demands.values()) > capacity:
        raise ValueError("itp_split requires demands at most the capacity")
    _check_cycle(view, cycle)
    plan = best_itp_plan(view, cycle, capacity)
    h = view.h_instance()
    tours = []
    for seg in plan.segments:
        visits = []
        for v, take in seg:
            amount = int(round(take))
            assert abs(take - amount) < 1e-6, "integer cuts expected"
            visits.append((inst.customers[v], amount))
        tours.append(make_tour(h, view.o_id, visits))
    return Solution.from_tours(tours)


def _whole_assign(segs: list[list[list]]) -> list[list[list]]:
    """Resolve straddling customers by whole assignment to the larger share.

    Mutates a deep-ish copy; empty segments are dropped.  With segment
    capacity q and every load at most q, the resulting per-segment load is at
    most q plus half a load per boundary.
    """
    segs = [list(list(e) for e in s) for s in segs]
    for b in range(len(segs) - 1):
        left, right = segs[b], segs[b + 1]
        if left and right and left[-1][0] == right[0][0]:
            if left[-1][1] >= right[0][1]:
                left[-1][1] += right[0][1]
                right.pop(0)
            else:
                right[0][1] += left[-1][1]
                left.pop()
    return [s for s in segs if s]


def uitp_split(view: SuperDepotView, cycle: HamCycle, k: int) -> Solution:
    """Unsplittable tour partitioning on the reduced graph, for even capacity.

    Customers above half capacity get dedicated round trips; the rest go
    through half-capacity exact-fill segments, with each straddler assigned
    wholly to its larger side.  Output cost is at most ``(4/k)*delta + c(cycle)``.
    """
    if k % 2:
        raise ValueError("even k required for unsplittable cycle partitioning")
    inst = view.instance
    if max(inst.demands.values()) > k:
        raise ValueError("uitp_split requires demands at most the capacity")
    _check_cycle(view, cycle)
    h = view.h_instance()
    dem = inst.demand_array
    half = k // 2

    tours = []
    rest = []
    for v in _rotate_to(cycle.order, view.o_index)[1:]:
        if dem[v] > half:
            tours.append(make_tour(h, view.o_id, [(inst.customers[v], int(dem[v]))]))
        else:
            rest.append(v)
    if rest:
        loads = {v: float(dem[v]) for v in rest}
        best_segs, best_cost = None, np.inf
        for first_cut in range(1, half + 1):
            segs = _whole_assign(fill_segments(rest, loads, float(half), float(first_cut)))
            cost = _segments_cost(view.reduced_weights, view.o_index, segs)
            if cost < best_cost - _EPS:
                best_segs, best_cost = segs, cost
        for seg in best_segs:
            visits = [(inst.customers[v], int(dem[v])) for v, _ in seg]
            load = sum(a for _, a in visits)
            assert load <= k, "whole assignment exceeded capacity"
            tours.append(make_tour(h, view.o_id, visits))
    return Solution.from_tours(tours)


def _check_cycle(view: SuperDepotView, cycle: HamCycle) -> None:
    expect = set(range(view.instance.n + 1))
    if set(cycle.order) != expect or len(cycle.order) != len(expect):
        raise ValueError("cycle must span all customers plus the reduced depot")


# --------------------------------------------------------------------------
# expansion back to real depots
# --------------------------------------------------------------------------

def fix_open_walk(instance: Instance, depot_start, depot_end, visits: Sequence) -> Tour:
    """Close a depot-to-depot walk into a tour at the cheaper endpoint.

    The chosen closure costs at most ``w(u_s, v_i) + 2 w(segment) + w(v_j, u_t)``.
    """
    depot_set = set(instance.depots)
    for v, _ in visits:
        if v in depot_set:
            raise ValueError(f"walk interior contains depot {v!r}")
    if depot_start == depot_end:
        return make_tour(instance, depot_start, visits)
    ids = [v for v, _ in visits]
    cost_s = tour_weight(instance, depot_start, ids)
    cost_t = tour_weight(instance, depot_end, ids)
    if cost_s <= cost_t:
        return Tour(depot=depot_start, visits=tuple(visits), weight=cost_s)
    return Tour(depot=depot_end, visits=tuple(visits), weight=cost_t)


def expand_to_depots(instance: Instance, view: SuperDepotView, h_solution: Solution) -> Solution:
    """Expand a reduced-graph solution to the multidepot graph.

    Depot edges map to each endpoint's anchor depot; dummy customer edges are
    replaced by their two depot legs, splitting the tour; every open walk is
    then closed on its cheaper side.  The repairs cost at most the weight of
    the cycle segments, i.e. one extra ``c(C)`` overall for cycle partitions.
    """
    dummy = view.dummy_mask
    anchor = view.anchor_index
    cidx = instance._customer_index
    tours = []
    for t in h_solution.tours:
        pieces: list[list] = [[]]
        for v, amount in t.visits:
            if pieces[-1]:
                prev = pieces[-1][-1][0]
                if dummy[cidx[prev], cidx[v]]:
                    pieces.append([])
            pieces[-1].append((v, amount))
        for piece in pieces:
            if not piece:
                continue
            u_s = instance.depots[anchor[cidx[piece[0][0]]] - instance.n]
            u_t = instance.depots[anchor[cidx[piece[-1][0]]] - instance.n]
            tours.append(fix_open_walk(instance, u_s, u_t, piece))
    return Solution.from_tours(tours)


def cycle_partition_mcvrp(
    instance: Instance, view: SuperDepotView, cycle: HamCycle
) -> Solution:
    """Cycle-partition algorithm for the multidepot problem.

    Splittable / unit demands use plain tour partitioning, unsplittable
    demands the half-capacity variant (even capacity only); the result is
    expanded to real depots.  Certificates: ``(2/k)*delta + 2*c(C)`` for
    splittable / unit, ``(4/k)*delta + 2*c(C)`` for unsplittable.
    """
    k = instance.capacity
    if instance.variant == "unsplittable":
        h_sol = uitp_split(view, cycle, k)
    else:
        h_sol = itp_split(view, cycle, k, variant=instance.variant)
    return expand_to_depots(instance, view, h_sol)


# --------------------------------------------------------------------------
# tree partitioning
# --------------------------------------------------------------------------

def restricted_mst(view: SuperDepotView, customer_indices: Sequence[int]) -> WeightedTree:
    """Minimum spanning tree of the reduced graph avoiding dummy edges.

    Dummy edges are never needed in a minimum tree (each can be swapped for a
    depot edge at no extra cost), and avoiding them makes the tree map to a
    constrained spanning forest of the original graph.
    """
    c = view.reduced_weights
    o = view.o_index
    dummy = view.dummy_mask
    verts = sorted(customer_indices)
    edges = [(v, o, float(c[v, o])) for v in verts]
    for a in range(len(verts)):
        for b in range(a + 1, len(verts)):
            i, j = verts[a], verts[b]
            if not dummy[i, j]:
                edges.append((i, j, float(c[i, j])))
    return kruskal(verts + [o], edges)


@dataclass(frozen=True)
class ForestPartition:
    """Rooted constrained spanning forest used by the tree splitter."""

    roots: tuple  # depot matrix indices
    children: Mapping  # vertex -> tuple of child vertices
    parent: Mapping  # vertex -> parent vertex


def constrained_forest(
    instance: Instance, view: SuperDepotView, tree: WeightedTree
) -> ForestPartition:
    """Map a dummy-free reduced spanning tree to a forest rooted at depots."""
    o = view.o_index
    anchor = view.anchor_index
    adj: dict[int, list[int]] = {}
    for i, j, _ in tree.edges:
        if j == o:
            i, j = j, i
        if i == o:
            a, b = int(anchor[j]), j
        else:
            a, b = i, j
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)

    roots = sorted(v for v in adj if v >= instance.n)
    parent: dict[int, int] = {}
    children: dict[int, list[int]] = {v: [] for v in adj}
    seen = set()
    for r in roots:
        stack = [r]
        seen.add(r)
        while stack:
            x = stack.pop()
            for y in sorted(adj[x], reverse=True):
                if y in seen:
                    continue
                if y >= instance.n:
                    raise AssertionError("forest component with two depots")
                seen.add(y)
                parent[y] = x
                children[x].append(y)
                stack.append(y)
        children = {v: ch for v, ch in children.items()}
    for v in children:
        children[v] = sorted(children[v])
    assert seen == set(adj), "forest does not span its vertex set"
    return ForestPartition(
        roots=tuple(roots),
        children={v: tuple(ch) for v, ch in children.items()},
        parent=dict(parent),
    )


def greedy_pack(demands: Sequence[int], k: int) -> list[list[int]]:
    """Greedy partition of subtree demands into groups in (floor(k/2), k].

    Returns groups with the leftover first: ``result[0]`` has total at most
    ``floor(k/2)`` (possibly empty), every later group is full.
    """
    half = k // 2
    for d in demands:
        if d > k:
            raise ValueError(f"subtree demand {d} above capacity {k}")
    full: list[list[int]] = []
    cur: list[int] = []
    cur_d = 0
    for i, d in enumerate(demands):
        if d > half:
            full.append([i])
            continue
        cur.append(i)
        cur_d += d
        if cur_d > half:
            full.append(cur)
            cur, cur_d = [], 0
    return [cur] + full


def _component_tour(
    instance: Instance,
    depot_gidx: int,
    edges: Sequence[tuple[int, int]],
    serve: Iterable[int],
    extra_edge: tuple[int, int] | None = None,
) -> Tour:
    """Tour from doubling a connected component (plus its depot edge) and shortcutting."""
    multi = []
    for e in edges:
        multi.extend([e, e])
    if extra_edge is not None:
        multi.extend([extra_edge, extra_edge])
    walk = euler_circuit(multi, start=depot_gidx)
    keep = set(serve) | {depot_gidx}
    path = shortcut(walk, keep)
    assert path[0] == depot_gidx and path[-1] == depot_gidx
    depot_id = instance.depots[depot_gidx - instance.n]
    visits = [
        (instance.customers[v], instance.demands[instance.customers[v]]) for v in path[1:-1]
    ]
    return make_tour(instance, depot_id, visits)


def refined_tree_partition(instance: Instance, view: SuperDepotView) -> Solution:
    """Tree-partition algorithm: certificate ``2/(floor(k/2)+1)*delta + 2*c(T')``.

    Customers above half capacity get trivial tours; the rest are covered by
    carving the constrained spanning forest of a dummy-free reduced MST into
    components of demand in (floor(k/2), k], each doubled and shortcut.
    """
    k = instance.capacity
    half = k // 2
    if max(instance.demands.values()) > k:
        raise ValueError("refined_tree_partition requires demands at most the capacity")
    dem = instance.demand_array
    tours: list[Tour] = []
    rest: list[int] = []
    for i, v in enumerate(instance.customers):
        if dem[i] > half:
            depot = instance.depots[view.anchor_index[i] - instance.n]
            tours.append(make_tour(instance, depot, [(v, int(dem[i]))]))
        else:
            rest.append(i)
    if not rest:
        return Solution.from_tours(tours)

    forest = constrained_forest(instance, view, restricted_mst(view, rest))
    children = {v: list(ch) for v, ch in forest.children.items()}
    w = instance.weights
    n = instance.n

    def subtree_vertices(x: int) -> list[int]:
        out, stack = [], [x]
        while stack:
            y = stack.pop()
            out.append(y)
            stack.extend(children.get(y, []))
        return out

    def subtree_demand(x: int) -> int:
        return int(sum(dem[y] for y in subtree_vertices(x) if y < n))

    def subtree_edges(x: int) -> list[tuple[int, int]]:
        out, stack = [], [x]
        while stack:
            y = stack.pop()
            for z in children.get(y, []):
                out.append((y, z))
                stack.append(z)
        return out

    for root in forest.roots:
        chosen_junctions: set[int] = set()
        guard = 0
        while subtree_demand(root) > k:
            guard += 1
            assert guard <= instance.n + 1, "tree splitting failed to terminate"
            junction = None
            stack = [root]
            while stack:
                x = stack.pop()
                if subtree_demand(x) > k and all(
                    subtree_demand(c) <= k for c in children.get(x, [])
                ):
                    junction = x
                    break
                # descend depth-first, lowest-index child first
                stack.extend(reversed(children.get(x, [])))
            assert junction is not None
            assert junction not in chosen_junctions, "junction selected twice"
            chosen_junctions.add(junction)

            subs = children[junction]
            groups = greedy_pack([subtree_demand(c) for c in subs], k)
            leftover, fulls = groups[0], groups[1:]
            if leftover and sum(subtree_demand(subs[i]) for i in leftover) > half:
                fulls.append(leftover)
                leftover = []
            carved = set()
            for grp in fulls:
                members = [subs[i] for i in grp]
                comp_vertices = [junction] + [
                    y for c in members for y in subtree_vertices(c)
                ]
                comp_edges = [(junction, c) for c in members] + [
                    e for c in members for e in subtree_edges(c)
                ]
                serve = [y for y in comp_vertices if y != junction and y < n]
                if junction >= n:  # the depot itself is the junction
                    tours.append(_component_tour(instance, junction, comp_edges, serve))
                else:
                    cand = [
                        (float(w[n + d, x]), n + d, x)
                        for d in range(instance.m)
                        for x in comp_vertices
                    ]
                    _, u_star, x_star = min(cand)
                    tours.append(
                        _component_tour(
                            instance, u_star, comp_edges, serve, extra_edge=(u_star, x_star)
                        )
                    )
                carved.update(members)
            children[junction] = [c for c in subs if c not in carved]

        remaining = [y for y in subtree_vertices(root) if y < n]
        if remaining:
            tours.append(_component_tour(instance, root, subtree_edges(root), remaining))
    return Solution.from_tours(tours)


def tree_partition_certificate(instance: Instance, view: SuperDepotView) -> float:
    """Numeric upper bound ``2/(floor(k/2)+1)*delta + 2*c(T')`` for the tree algorithm."""
    half = instance.capacity // 2
    rest = [i for i in range(instance.n) if instance.demand_array[i] <= half]
    tree_cost = restricted_mst(view, rest).cost if rest else 0.0
    return 2.0 / (half + 1) * view.delta + 2.0 * tree_cost


def cycle_partition_certificate(
    instance: Instance, view: SuperDepotView, cycle: HamCycle
) -> float:
    """Numeric upper bound for the cycle algorithm on this instance/cycle."""
    k = instance.capacity
    rate = 4.0 / k if instance.variant == "unsplittable" else 2.0 / k
    return rate * view.delta + 2.0 * cycle.cost
