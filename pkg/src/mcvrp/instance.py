"""Problem instances, the single-super-depot reduction, and feasibility checks.

An instance is a complete semi-metric graph over customers and depots with
positive integer demands and a vehicle capacity.  The reduction collapses all
depots into a synthetic depot ``o`` with ``c(o,v) = min_u w(u,v)`` and
``c(v,v') = min{c(o,v)+c(o,v'), w(v,v')}``; customer pairs whose reduced
distance routes through a depot are recorded as dummy edges so solutions in
the reduced graph can be expanded back to real depots.

All types are immutable after construction and all functions are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InfeasibleInstanceError, InvalidInstanceError

VARIANTS = ("unit", "splittable", "unsplittable")

#: comparisons of edge weights use this tolerance, scaled by magnitude
WEIGHT_TOL = 1e-9


def _tol(scale: float) -> float:
    return WEIGHT_TOL * (1.0 + abs(scale))


@dataclass(frozen=True)
class MetricReport:
    """Outcome of checking a weight matrix for the semi-metric properties.

    ``triangle`` entries are triples ``(i, via, j)`` meaning
    ``w[i, j] > w[i, via] + w[via, j]`` beyond tolerance.
    """

    symmetry: tuple[tuple[int, int], ...]
    diagonal: tuple[int, ...]
    triangle: tuple[tuple[int, int, int], ...]

    @property
    def ok(self) -> bool:
        return not (self.symmetry or self.diagonal or self.triangle)

    @property
    def violations(self) -> list[tuple]:
        return list(self.symmetry) + [(i,) for i in self.diagonal] + list(self.triangle)


def validate_metric(weights: np.ndarray) -> MetricReport:
    """Check symmetry, zero diagonal and the triangle inequality on all triples.

    Structural problems (non-square shape, negative or non-finite entries)
    raise :class:`InvalidInstanceError`; metric violations are data, returned
    in the report.
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise InvalidInstanceError(f"weight matrix must be square, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise InvalidInstanceError("weight matrix contains non-finite entries")
    if np.any(w < 0):
        i, j = np.argwhere(w < 0)[0]
        raise InvalidInstanceError(f"negative weight at ({i}, {j})")

    sym = np.argwhere(np.abs(w - w.T) > _tol(float(np.max(w, initial=0.0))))
    symmetry = tuple((int(i), int(j)) for i, j in sym if i < j)
    diagonal = tuple(int(i) for i in np.flatnonzero(np.abs(np.diag(w)) > WEIGHT_TOL))

    # slack[i, via, j] = w[i, via] + w[via, j] - w[i, j]
    slack = w[:, :, None] + w[None, :, :] - w[:, None, :]
    tol = WEIGHT_TOL * (1.0 + np.abs(w[:, None, :]))
    bad = np.argwhere(slack < -tol)
    triangle = tuple(
        (int(i), int(via), int(j)) for i, via, j in bad if i != via and j != via and i != j
    )
    return MetricReport(symmetry=symmetry, diagonal=diagonal, triangle=triangle)


def _frozen_array(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Instance:
    """A multidepot CVRP instance on a complete semi-metric graph.

    ``weights`` is indexed customers-first, depots-last, in the order of the
    ``customers`` and ``depots`` tuples.  Instances validate eagerly, so
    algorithms may assume the invariants.
    """

    customers: tuple
    depots: tuple
    weights: np.ndarray
    demands: Mapping
    capacity: int
    variant: str
    provenance: Mapping | None = None  # clone id -> original customer id

    def __post_init__(self):
        customers = tuple(self.customers)
        depots = tuple(self.depots)
        object.__setattr__(self, "customers", customers)
        object.__setattr__(self, "depots", depots)
        object.__setattr__(self, "weights", _frozen_array(self.weights))
        object.__setattr__(self, "demands", dict(self.demands))

        n, m = len(customers), len(depots)
        if n < 1 or m < 1:
            raise InvalidInstanceError("need at least one customer and one depot")
        if len(set(customers)) != n or len(set(depots)) != m:
            raise InvalidInstanceError("duplicate vertex ids")
        if set(customers) & set(depots):
            raise InvalidInstanceError("customer and depot ids overlap")
        if self.variant not in VARIANTS:
            raise InvalidInstanceError(f"unknown variant {self.variant!r}")
        if not (isinstance(self.capacity, (int, np.integer)) and self.capacity >= 1):
            raise InvalidInstanceError("capacity must be a positive integer")
        object.__setattr__(self, "capacity", int(self.capacity))

        if self.weights.shape != (n + m, n + m):
            raise InvalidInstanceError(
                f"weights must be {(n + m, n + m)}, got {self.weights.shape}"
            )
        report = validate_metric(self.weights)
        if not report.ok:
            raise InvalidInstanceError(f"weights are not a semi-metric: {report.violations[:5]}")

        if set(self.demands) != set(customers):
            raise InvalidInstanceError("demands must cover exactly the customer set")
        for v, d in self.demands.items():
            if not (isinstance(d, (int, np.integer)) and d >= 1):
                raise InvalidInstanceError(f"demand of {v!r} must be a positive integer")
        object.__setattr__(self, "demands", {v: int(d) for v, d in self.demands.items()})
        if self.variant == "unit" and any(d != 1 for d in self.demands.values()):
            raise InvalidInstanceError("unit variant requires all demands equal to 1")

    # index helpers -------------------------------------------------------
    @cached_property
    def _customer_index(self) -> dict:
        return {v: i for i, v in enumerate(self.customers)}

    @cached_property
    def _depot_index(self) -> dict:
        return {u: len(self.customers) + j for j, u in enumerate(self.depots)}

    @property
    def n(self) -> int:
        return len(self.customers)

    @property
    def m(self) -> int:
        return len(self.depots)

    def index_of(self, vertex) -> int:
        """Matrix index of a customer or depot id."""
        i = self._customer_index.get(vertex)
        if i is None:
            i = self._depot_index.get(vertex)
        if i is None:
            raise KeyError(f"unknown vertex {vertex!r}")
        return i

    def w(self, a, b) -> float:
        return float(self.weights[self.index_of(a), self.index_of(b)])

    @cached_property
    def demand_array(self) -> np.ndarray:
        return _frozen_array(np.array([self.demands[v] for v in self.customers]))

    @property
    def total_demand(self) -> int:
        return int(sum(self.demands.values()))

    def restrict(self, customer_subset: Iterable) -> "Instance":
        """Sub-instance on a customer subset (instance order preserved)."""
        keep = set(customer_subset)
        customers = tuple(v for v in self.customers if v in keep)
        if len(customers) != len(keep):
            raise KeyError("restrict: unknown customer id")
        idx = [self._customer_index[v] for v in customers] + [
            self._depot_index[u] for u in self.depots
        ]
        prov = None
        if self.provenance:
            prov = {v: o for v, o in self.provenance.items() if v in keep}
        return Instance(
            customers=customers,
            depots=self.depots,
            weights=self.weights[np.ix_(idx, idx)],
            demands={v: self.demands[v] for v in customers},
            capacity=self.capacity,
            variant=self.variant,
            provenance=prov,
        )


@dataclass(frozen=True)
class SuperDepotView:
    """The single-depot reduction of an instance.

    ``reduced_weights`` covers the customers (instance order) plus the
    synthetic depot at the last index.  ``dummy_edges`` holds the customer
    pairs whose reduced distance strictly routes through depots.
    """

    instance: Instance
    reduced_weights: np.ndarray
    depot_anchor: Mapping
    dummy_edges: frozenset
    delta: float
    o_id: str = "o"

    @property
    def o_index(self) -> int:
        return self.instance.n

    @cached_property
    def depot_distance(self) -> np.ndarray:
        """c(o, v) for each customer, in instance order."""
        return _frozen_array(self.reduced_weights[-1, :-1])

    @cached_property
    def anchor_index(self) -> np.ndarray:
        """Matrix index (in the instance) of each customer's anchor depot."""
        inst = self.instance
        out = np.array(
            [inst.index_of(self.depot_anchor[v]) for v in inst.customers], dtype=np.int64
        )
        out.setflags(write=False)
        return out

    @cached_property
    def dummy_mask(self) -> np.ndarray:
        n = self.instance.n
        mask = np.zeros((n, n), dtype=bool)
        ci = self.instance._customer_index
        for a, b in self.dummy_edges:
            i, j = ci[a], ci[b]
            mask[i, j] = mask[j, i] = True
        mask.setflags(write=False)
        return mask

    def h_instance(self) -> Instance:
        """The reduced graph as a single-depot instance (same capacity/variant)."""
        return Instance(
            customers=self.instance.customers,
            depots=(self.o_id,),
            weights=self.reduced_weights,
            demands=self.instance.demands,
            capacity=self.instance.capacity,
            variant=self.instance.variant,
        )


def build_super_depot(instance: Instance) -> SuperDepotView:
    """Collapse all depots into one synthetic depot.

    ``c(o,v)`` is the nearest-depot distance (ties to the lowest depot index)
    and customer-customer distances are capped by the two-leg depot detour.
    """
    n, m = instance.n, instance.m
    w_cc = instance.weights[:n, :n]
    w_dc = instance.weights[n:, :n]  # depots x customers

    c_o = w_dc.min(axis=0)
    anchor_rows = w_dc.argmin(axis=0)  # first minimum = lowest depot index
    detour = c_o[:, None] + c_o[None, :]
    reduced_cc = np.minimum(w_cc, detour)

    dummies = []
    for i in range(n):
        for j in range(i + 1, n):
            if detour[i, j] + _tol(w_cc[i, j]) < w_cc[i, j]:
                dummies.append((instance.customers[i], instance.customers[j]))
            else:
                reduced_cc[i, j] = reduced_cc[j, i] = w_cc[i, j]

    reduced = np.zeros((n + 1, n + 1))
    reduced[:n, :n] = reduced_cc
    reduced[:n, n] = reduced[n, :n] = c_o

    o_id = "o"
    taken = set(instance.customers) | set(instance.depots)
    while o_id in taken:
        o_id = "_" + o_id

    anchors = {
        instance.customers[i]: instance.depots[int(anchor_rows[i])] for i in range(n)
    }
    delta = float(np.dot(instance.demand_array, c_o))
    return SuperDepotView(
        instance=instance,
        reduced_weights=_frozen_array(reduced),
        depot_anchor=anchors,
        dummy_edges=frozenset(dummies),
        delta=delta,
        o_id=o_id,
    )


@dataclass(frozen=True)
class Tour:
    """A depot-anchored closed walk with integer deliveries."""

    depot: object
    visits: tuple  # ((customer id, delivered amount), ...)
    weight: float

    def __post_init__(self):
        # normalize numpy integers; anything non-integral is left for
        # validate_solution to flag
        object.__setattr__(
            self,
            "visits",
            tuple(
                (v, int(a)) if isinstance(a, (int, np.integer)) else (v, a)
                for v, a in self.visits
            ),
        )

    @property
    def load(self) -> int:
        return sum(a for _, a in self.visits)

    @property
    def customer_ids(self) -> tuple:
        return tuple(v for v, _ in self.visits)


def tour_weight(instance: Instance, depot, visit_ids: Sequence) -> float:
    """Length of the closed walk depot -> visits -> depot."""
    if not visit_ids:
        return 0.0
    path = [depot, *visit_ids, depot]
    idx = [instance.index_of(x) for x in path]
    return float(sum(instance.weights[a, b] for a, b in zip(idx, idx[1:])))


def make_tour(instance: Instance, depot, visits: Sequence) -> Tour:
    """Build a tour, computing its weight from the instance."""
    return Tour(
        depot=depot,
        visits=tuple(visits),
        weight=tour_weight(instance, depot, [v for v, _ in visits]),
    )


@dataclass(frozen=True)
class Solution:
    """A set of capacity-feasible tours meeting all demand."""

    tours: tuple
    total_weight: float

    @classmethod
    def from_tours(cls, tours: Iterable[Tour]) -> "Solution":
        tours = tuple(tours)
        return cls(tours=tours, total_weight=float(sum(t.weight for t in tours)))

    def __add__(self, other: "Solution") -> "Solution":
        return Solution.from_tours(self.tours + other.tours)


@dataclass(frozen=True)
class FeasibilityReport:
    """Violations found by :func:`validate_solution`; empty means feasible."""

    violations: tuple  # (code, message) pairs

    @property
    def ok(self) -> bool:
        return not self.violations

    def codes(self) -> set:
        return {c for c, _ in self.violations}


def validate_solution(instance: Instance, solution: Solution) -> FeasibilityReport:
    """Check every feasibility condition; violations are data, not exceptions."""
    out: list[tuple[str, str]] = []
    delivered: dict = {v: 0 for v in instance.customers}
    tours_per_customer: dict = {v: 0 for v in instance.customers}
    depot_set = set(instance.depots)

    for t_idx, tour in enumerate(solution.tours):
        if tour.depot not in depot_set:
            out.append(("depot-membership", f"tour {t_idx}: depot {tour.depot!r} unknown"))
            continue
        load = 0
        for v, amount in tour.visits:
            if v not in delivered:
                out.append(("unknown-customer", f"tour {t_idx}: {v!r} is not a customer"))
                continue
            if not isinstance(amount, int) or amount < 1:
                out.append(("integer-delivery", f"tour {t_idx}: delivery to {v!r} is {amount}"))
                continue
            delivered[v] += amount
            tours_per_customer[v] += 1
            load += amount
        if load > instance.capacity:
            out.append(("capacity", f"tour {t_idx}: load {load} > k={instance.capacity}"))
        recomputed = tour_weight(instance, tour.depot, [v for v, _ in tour.visits])
        if abs(recomputed - tour.weight) > _tol(tour.weight):
            out.append(
                ("weight-mismatch", f"tour {t_idx}: stored {tour.weight}, actual {recomputed}")
            )

    for v in instance.customers:
        if delivered[v] != instance.demands[v]:
            out.append(
                ("coverage", f"{v!r}: delivered {delivered[v]} of {instance.demands[v]}")
            )
        if instance.variant == "unsplittable" and tours_per_customer[v] > 1:
            out.append(("single-tour", f"{v!r} split across {tours_per_customer[v]} tours"))

    total = sum(t.weight for t in solution.tours)
    if abs(total - solution.total_weight) > _tol(total):
        out.append(("weight-mismatch", f"total {solution.total_weight} != {total}"))
    return FeasibilityReport(violations=tuple(out))


def nearest_depot(instance: Instance, customer) -> tuple:
    """(depot id, distance), ties to the lowest depot index."""
    i = instance.index_of(customer)
    col = instance.weights[instance.n :, i]
    j = int(np.argmin(col))
    return instance.depots[j], float(col[j])


def _clone_ids(base, count: int, taken: set) -> list:
    out = []
    i = 0
    while len(out) < count:
        cand = f"{base}~{i}"
        if cand not in taken:
            out.append(cand)
            taken.add(cand)
        i += 1
    return out


def _expand_colocated(instance: Instance, pieces: Mapping) -> Instance:
    """Replace customers by co-located copies with the given demand lists.

    ``pieces[v]`` is the list of demands for the copies of ``v``; customers
    absent from ``pieces`` keep a single copy with their current demand, and
    a single piece keeps the original id.  Copies record provenance to the
    ultimate original id.
    """
    taken = set(instance.customers) | set(instance.depots)
    new_ids: list = []
    new_demands: dict = {}
    src_rows: list[int] = []
    prov: dict = {}
    old_prov = dict(instance.provenance or {})

    for i, v in enumerate(instance.customers):
        parts = pieces.get(v, [instance.demands[v]])
        if len(parts) == 1:
            ids = [v]
        else:
            ids = _clone_ids(v, len(parts), taken)
        for cid, d in zip(ids, parts):
            new_ids.append(cid)
            new_demands[cid] = d
            src_rows.append(i)
            origin = old_prov.get(v, v)
            if cid != v or v in old_prov:
                prov[cid] = origin

    rows = src_rows + [instance.n + j for j in range(instance.m)]
    weights = instance.weights[np.ix_(rows, rows)]
    # co-located copies: zero distance between copies of the same customer
    return Instance(
        customers=tuple(new_ids),
        depots=instance.depots,
        weights=weights,
        demands=new_demands,
        capacity=instance.capacity,
        variant=instance.variant,
        provenance=prov or None,
    )


def preprocess_demands(instance: Instance) -> tuple[Instance, list[Tour]]:
    """Normalize demands to at most the capacity.

    Unsplittable demand above capacity is infeasible.  Splittable demand above
    ``m(n-1)(k-1)`` is peeled off with cheapest trivial tours, and any residual
    demand above ``k`` is split into co-located customers.
    """
    if instance.variant == "unit":
        return instance, []

    k = instance.capacity
    if instance.variant == "unsplittable":
        for v, d in instance.demands.items():
            if d > k:
                raise InfeasibleInstanceError(
                    f"unsplittable demand {d} of {v!r} exceeds capacity {k}"
                )
        return instance, []

    n, m = instance.n, instance.m
    threshold = m * (n - 1) * (k - 1)
    trivial: list[Tour] = []
    residual: dict = {}
    for v in instance.customers:
        d = instance.demands[v]
        if d > threshold:
            count = math.ceil((d - threshold) / k)
            total = min(count * k, d)
            depot, dist = nearest_depot(instance, v)
            amounts = [k] * (count - 1) + [total - k * (count - 1)]
            for a in amounts:
                trivial.append(Tour(depot=depot, visits=((v, a),), weight=2.0 * dist))
            d -= total
            assert 0 <= d <= threshold
        residual[v] = d

    keep = [v for v in instance.customers if residual[v] > 0]
    if not keep:
        # every customer was fully peeled off; an instance needs n >= 1, so
        # move one unit from the last trivial tour back into the model
        last = trivial[-1]
        v, amount = last.visits[0]
        if amount > 1:
            trivial[-1] = Tour(depot=last.depot, visits=((v, amount - 1),), weight=last.weight)
        else:
            trivial.pop()
        residual[v] = 1
        keep = [v]

    reduced = instance.restrict(keep)
    reduced = replace(reduced, demands={v: residual[v] for v in keep})
    pieces = {}
    for v in keep:
        d = residual[v]
        if d > k:
            parts = [k] * (d // k)
            if d % k:
                parts.append(d % k)
            pieces[v] = parts
    if pieces:
        reduced = _expand_colocated(reduced, pieces)
    assert max(reduced.demands.values()) <= k
    return reduced, trivial


def unitize(instance: Instance) -> Instance:
    """Split every customer into co-located unit-demand customers.

    Intended for splittable instances with demands already at most the
    capacity; preserves the optimal value exactly.
    """
    if instance.variant not in ("splittable", "unit"):
        raise InvalidInstanceError("unitize applies to splittable (or unit) instances")
    if max(instance.demands.values()) > instance.capacity:
        raise InvalidInstanceError("run preprocess_demands before unitize")
    if all(d == 1 for d in instance.demands.values()):
        return instance if instance.variant == "unit" else replace(instance, variant="unit")
    pieces = {v: [1] * instance.demands[v] for v in instance.customers}
    out = _expand_colocated(instance, pieces)
    return replace(out, variant="unit")


def fold_solution(instance: Instance, solution: Solution) -> Solution:
    """Map a solution on cloned customers back to the original ids.

    Uses the provenance recorded by :func:`unitize` / :func:`preprocess_demands`;
    repeated visits to co-located clones collapse into one visit with the
    summed amount (weights are unchanged: clones are at distance zero).
    """
    prov = dict(instance.provenance or {})
    if not prov:
        return solution
    tours = []
    for t in solution.tours:
        merged: list[list] = []
        for v, a in t.visits:
            ov = prov.get(v, v)
            if merged and merged[-1][0] == ov:
                merged[-1][1] += a
            else:
                merged.append([ov, a])
        # clones of one customer may be interleaved with others; merge globally
        totals: dict = {}
        order = []
        for ov, a in merged:
            if ov not in totals:
                order.append(ov)
                totals[ov] = 0
            totals[ov] += a
        tours.append(
            Tour(depot=t.depot, visits=tuple((ov, totals[ov]) for ov in order), weight=t.weight)
        )
    return Solution.from_tours(tours)
