"""Tour enumeration, the covering LP, randomized rounding, and the LP-based algorithms.

For fixed capacity the feasible tours form a weighted set system over the
customers; the covering LP relaxes the choice of tours.  Rounding keeps each
tour with probability ``min(gamma * x, 1)``, leaving every customer uncovered
with probability at most ``exp(-gamma)``; the conditional-expectation
derandomization makes the corresponding cost inequality hold on every run,
not just in expectation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np

from .errors import BudgetExceededError, InfeasibleInstanceError, InvalidInstanceError
from .instance import (
    Instance,
    Solution,
    SuperDepotView,
    Tour,
    build_super_depot,
    make_tour,
    tour_weight,
)
from .partition import (
    expand_to_depots,
    fill_segments,
    refined_tree_partition,
    restricted_mst,
    _whole_assign,
)
from .ratios import gamma_recipe
from .tsp import HamCycle, exact_tsp_small, shortcut_cycle

ENUMERATION_BUDGET = 1_000_000
_EPS = 1e-9


@dataclass(frozen=True)
class PoolTour:
    """One feasible tour: a depot, a customer subset, and its optimal order."""

    depot: object
    customers: frozenset
    order: tuple  # visiting order of the subset (depot excluded)
    weight: float


@dataclass(frozen=True)
class TourPool:
    """Enumerated feasible tours plus the customer universe they must cover."""

    instance: Instance
    tours: tuple
    universe: frozenset

    def dump(self, path) -> None:
        """One tour per line: depot id, comma-joined subset, weight."""
        with open(path, "w") as fh:
            for t in self.tours:
                ids = ",".join(str(v) for v in t.order)
                fh.write(f"{t.depot}\t{ids}\t{t.weight:.12g}\n")


@dataclass(frozen=True)
class FractionalSelection:
    """LP values per pool tour (by pool index) and the LP objective."""

    values: Mapping
    objective: float


@dataclass(frozen=True)
class RoundingOutcome:
    """Tours kept by rounding, the still-uncovered customers, and the trace.

    In derandomized mode ``estimator_trace`` starts at the initial estimator
    value and appends the value after every decision; it is non-increasing.
    """

    chosen: tuple  # Tour objects, post-deduplication
    chosen_indices: tuple
    uncovered: frozenset
    gamma: float
    seed: int | None
    derandomized: bool
    estimator_trace: tuple
    chosen_weight: float


def _subset_count(n: int, k: int, m: int) -> int:
    return m * sum(math.comb(n, i) for i in range(1, min(k, n) + 1))


def _optimal_tour(instance: Instance, depot, subset: Sequence) -> PoolTour:
    idx = [instance.index_of(depot)] + [instance.index_of(v) for v in subset]
    cyc = exact_tsp_small(instance.weights, idx)
    pos = cyc.order.index(idx[0])
    order_idx = cyc.order[pos + 1 :] + cyc.order[:pos]
    back = {instance.index_of(v): v for v in subset}
    return PoolTour(
        depot=depot,
        customers=frozenset(subset),
        order=tuple(back[i] for i in order_idx),
        weight=float(cyc.cost),
    )


def _enumerate_feasible(instance: Instance, k: int, budget: int) -> TourPool:
    n, m = instance.n, instance.m
    count = _subset_count(n, k, m)
    if count > budget:
        raise BudgetExceededError(
            f"{count} candidate tours exceed the budget of {budget}",
            size=count,
            budget=budget,
        )
    tours = []
    for size in range(1, min(k, n) + 1):
        for subset in combinations(instance.customers, size):
            if sum(instance.demands[v] for v in subset) > k:
                continue
            for depot in instance.depots:
                tours.append(_optimal_tour(instance, depot, subset))
    return TourPool(instance=instance, tours=tuple(tours), universe=frozenset(instance.customers))


def enumerate_tours_unit(
    instance: Instance, k: int | None = None, budget: int = ENUMERATION_BUDGET
) -> TourPool:
    """All (depot, subset) tours with at most ``k`` unit-demand customers.

    Visiting orders and weights are exact.  Guarded by ``k <= 6`` and the
    subset-count budget.
    """
    if instance.variant != "unit":
        raise InvalidInstanceError("enumerate_tours_unit requires the unit variant")
    k = instance.capacity if k is None else k
    if k > 6:
        raise BudgetExceededError(f"k={k} above the enumeration guard of 6", size=k, budget=6)
    return _enumerate_feasible(instance, k, budget)


def enumerate_big_tours(
    instance: Instance,
    view: SuperDepotView,
    delta: float,
    budget: int = ENUMERATION_BUDGET,
) -> TourPool:
    """Feasible tours over the big customers only (demand at least ``delta * k``).

    Each such tour holds at most ``1/delta`` big customers, so the pool is
    polynomial for fixed ``delta``; the size cap here is ``ceil(1/delta) <= 4``.
    """
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must lie strictly between 0 and 1")
    cap = math.ceil(1.0 / delta)
    if cap > 4:
        raise BudgetExceededError(
            f"ceil(1/delta)={cap} above the big-tour guard of 4", size=cap, budget=4
        )
    k = instance.capacity
    big = [v for v in instance.customers if instance.demands[v] >= delta * k - _EPS]
    count = _subset_count(len(big), cap, instance.m)
    if count > budget:
        raise BudgetExceededError(
            f"{count} candidate big tours exceed the budget of {budget}",
            size=count,
            budget=budget,
        )
    tours = []
    for size in range(1, min(cap, len(big)) + 1):
        for subset in combinations(big, size):
            if sum(instance.demands[v] for v in subset) > k:
                continue
            for depot in instance.depots:
                tours.append(_optimal_tour(instance, depot, subset))
    return TourPool(instance=instance, tours=tuple(tours), universe=frozenset(big))


# --------------------------------------------------------------------------
# the covering LP
# --------------------------------------------------------------------------

def _bland_simplex(T: np.ndarray, basis: list[int], cost: np.ndarray, allowed: np.ndarray):
    """Minimize cost over the tableau rows in place; Bland's rule throughout."""
    m = T.shape[0]
    tol = 1e-10
    while True:
        cb = cost[basis]
        reduced = cost[:-1] - cb @ T[:, :-1]
        candidates = np.flatnonzero((reduced < -tol) & allowed)
        if candidates.size == 0:
            return
        col = int(candidates[0])
        rows = np.flatnonzero(T[:, col] > tol)
        if rows.size == 0:
            raise RuntimeError("LP unbounded (cannot happen for covering LPs)")
        ratios = T[rows, -1] / T[rows, col]
        best = ratios.min()
        tie = rows[ratios <= best + tol]
        row = int(min(tie, key=lambda r: basis[r]))
        piv = T[row, col]
        T[row] /= piv
        for r in range(m):
            if r != row and T[r, col] != 0.0:
                T[r] -= T[r, col] * T[row]
        basis[row] = col


def solve_setcover_lp(pool: TourPool) -> FractionalSelection:
    """Optimal fractional covering of the pool universe (dense two-phase simplex)."""
    universe = sorted(pool.universe, key=pool.instance.index_of)
    if not universe:
        return FractionalSelection(values={}, objective=0.0)
    row_of = {v: r for r, v in enumerate(universe)}
    for v in universe:
        if not any(v in t.customers for t in pool.tours):
            raise InfeasibleInstanceError(f"customer {v!r} appears in no feasible tour")

    M, N = len(universe), len(pool.tours)
    A = np.zeros((M, N))
    for j, t in enumerate(pool.tours):
        for v in t.customers:
            if v in row_of:
                A[row_of[v], j] = 1.0
    w = np.array([t.weight for t in pool.tours])

    # columns: tours (N), surplus (M), artificials (M), rhs
    T = np.zeros((M, N + 2 * M + 1))
    T[:, :N] = A
    T[:, N : N + M] = -np.eye(M)
    T[:, N + M : N + 2 * M] = np.eye(M)
    T[:, -1] = 1.0
    basis = list(range(N + M, N + 2 * M))

    phase1 = np.zeros(N + 2 * M + 1)
    phase1[N + M : N + 2 * M] = 1.0
    allowed = np.ones(N + 2 * M, dtype=bool)
    _bland_simplex(T, basis, phase1, allowed)
    if float(phase1[basis] @ T[:, -1]) > 1e-7:
        raise InfeasibleInstanceError("covering LP infeasible")  # pragma: no cover

    # pivot leftover artificials out (degenerate rows), or drop dead rows
    allowed[N + M :] = False
    for r in range(M):
        if basis[r] >= N + M:
            cols = np.flatnonzero(np.abs(T[r, : N + M]) > 1e-9)
            if cols.size:
                col = int(cols[0])
                piv = T[r, col]
                T[r] /= piv
                for r2 in range(M):
                    if r2 != r and T[r2, col] != 0.0:
                        T[r2] -= T[r2, col] * T[r]
                basis[r] = col

    phase2 = np.zeros(N + 2 * M + 1)
    phase2[:N] = w
    _bland_simplex(T, basis, phase2, allowed)

    x = np.zeros(N + 2 * M)
    for r, b in enumerate(basis):
        x[b] = T[r, -1]
    xs = np.clip(x[:N], 0.0, None)
    assert np.all(A @ xs >= 1.0 - 1e-7), "LP cover constraint violated"
    objective = float(w @ xs)
    values = {j: float(xs[j]) for j in range(N) if xs[j] > 1e-12}
    return FractionalSelection(values=values, objective=objective)


# --------------------------------------------------------------------------
# rounding
# --------------------------------------------------------------------------

def tree_rounding_penalty(instance: Instance, view: SuperDepotView) -> dict:
    """Per-customer uncovered penalty ``2/(floor(k/2)+1) * d(v) * c(o,v)``."""
    kappa = 2.0 / (instance.capacity // 2 + 1)
    c_o = view.depot_distance
    return {
        v: kappa * instance.demands[v] * float(c_o[i])
        for i, v in enumerate(instance.customers)
    }


def _dedup_chosen(
    instance: Instance, pool: TourPool, chosen_idx: list[int]
) -> tuple[list[Tour], set]:
    """Keep each multiply-covered customer only where removal saves the least."""
    orders = {j: list(pool.tours[j].order) for j in chosen_idx}
    for v in sorted(pool.universe, key=instance.index_of):
        holders = [j for j in chosen_idx if v in orders[j]]
        if len(holders) < 2:
            continue
        savings = []
        for j in holders:
            cur = tour_weight(instance, pool.tours[j].depot, orders[j])
            without = tour_weight(
                instance, pool.tours[j].depot, [u for u in orders[j] if u != v]
            )
            savings.append((cur - without, j))
        _, keep = min(savings, key=lambda s: (s[0], s[1]))
        for j in holders:
            if j != keep:
                orders[j] = [u for u in orders[j] if u != v]

    tours = []
    covered = set()
    for j in chosen_idx:
        if not orders[j]:
            continue
        visits = [(v, instance.demands[v]) for v in orders[j]]
        tours.append(make_tour(instance, pool.tours[j].depot, visits))
        covered.update(orders[j])
    return tours, covered


def round_tours(
    pool: TourPool,
    fractional: FractionalSelection,
    gamma: float,
    mode: str = "derandomized",
    seed: int | None = None,
    uncovered_penalty: Mapping | None = None,
) -> RoundingOutcome:
    """Select tours with probability ``min(gamma * x, 1)`` each.

    ``seeded`` mode draws independent uniforms from a counter-based generator,
    so decision order never perturbs other draws.  ``derandomized`` mode fixes
    the decisions one tour at a time, minimizing the pessimistic estimator

        sum_{decided chosen} w + sum_{undecided} gamma x w
        + sum_v penalty(v) * prod_{undecided tours covering v} (1 - p)
          * [no decided chosen tour covers v]

    whose trace is non-increasing and starts at most at
    ``gamma * LP objective + exp(-gamma) * sum_v penalty(v)``.
    """
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    if mode not in ("seeded", "derandomized"):
        raise ValueError("mode must be 'seeded' or 'derandomized'")
    instance = pool.instance
    support = sorted(fractional.values)
    probs = {j: min(gamma * fractional.values[j], 1.0) for j in support}

    trace: list[float] = []
    if mode == "seeded":
        if seed is None:
            raise ValueError("seeded mode needs a seed")
        rng = np.random.Generator(np.random.Philox(key=int(seed)))
        u = rng.random(len(support))
        chosen_idx = [j for j, uj in zip(support, u) if uj < probs[j]]
    else:
        if uncovered_penalty is None:
            raise ValueError("derandomized mode needs the uncovered penalty weights")
        pen = dict(uncovered_penalty)
        tours_of = {v: [j for j in support if v in pool.tours[j].customers] for v in pool.universe}
        undecided = set(support)
        covered: set = set()
        w_chosen = 0.0
        w_undecided = sum(gamma * fractional.values[j] * pool.tours[j].weight for j in support)

        def uncovered_term() -> float:
            total = 0.0
            for v in pool.universe:
                if v in covered:
                    continue
                prod = 1.0
                for j in tours_of[v]:
                    if j in undecided:
                        prod *= 1.0 - probs[j]
                total += pen.get(v, 0.0) * prod
            return total

        trace.append(w_chosen + w_undecided + uncovered_term())
        chosen_idx = []
        for j in support:
            undecided.discard(j)
            w_undecided -= gamma * fractional.values[j] * pool.tours[j].weight
            base_unc = uncovered_term()
            phi_not = w_chosen + w_undecided + base_unc
            covered_j = [v for v in pool.tours[j].customers if v not in covered]
            covered.update(covered_j)
            phi_yes = w_chosen + pool.tours[j].weight + w_undecided + uncovered_term()
            if phi_yes < phi_not - _EPS:
                chosen_idx.append(j)
                w_chosen += pool.tours[j].weight
                trace.append(phi_yes)
            else:
                for v in covered_j:
                    covered.discard(v)
                trace.append(phi_not)

    chosen_tours, covered_now = _dedup_chosen(instance, pool, chosen_idx)
    uncovered = frozenset(v for v in pool.universe if v not in covered_now)
    return RoundingOutcome(
        chosen=tuple(chosen_tours),
        chosen_indices=tuple(chosen_idx),
        uncovered=uncovered,
        gamma=float(gamma),
        seed=seed if mode == "seeded" else None,
        derandomized=(mode == "derandomized"),
        estimator_trace=tuple(trace),
        chosen_weight=float(sum(t.weight for t in chosen_tours)),
    )


# --------------------------------------------------------------------------
# LP-based tree partition
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LpTreeResult:
    """LP tree algorithm output plus everything its certificate needs."""

    solution: Solution
    gamma: float
    kappa: float
    lp_objective: float
    instance_delta: float
    rounding: RoundingOutcome
    residual_customers: tuple
    residual_delta: float
    residual_tree_cost: float

    @property
    def rounding_bound(self) -> float:
        """gamma * LP + exp(-gamma) * kappa * delta; the estimator stays below it."""
        return (
            self.gamma * self.lp_objective
            + math.exp(-self.gamma) * self.kappa * self.instance_delta
        )

    @property
    def certificate_value(self) -> float:
        """Computable per-run upper bound on the solution cost."""
        return self.rounding_bound + 2.0 * self.residual_tree_cost


def lp_tree_partition(
    instance: Instance,
    view: SuperDepotView,
    gamma: float | None = None,
    mode: str = "derandomized",
    seed: int | None = None,
    budget: int = ENUMERATION_BUDGET,
) -> LpTreeResult:
    """Round the covering LP, then tree-partition the uncovered customers.

    Needs unit demands (run ``unitize`` first for splittable instances) or an
    unsplittable instance with small capacity.  In derandomized mode the
    realized cost obeys
    ``gamma * LP + exp(-gamma) * kappa * delta + 2 c(residual tree)``.
    """
    if instance.variant == "splittable":
        raise InvalidInstanceError("unitize splittable instances before the LP tree algorithm")
    k = instance.capacity
    if instance.variant == "unit":
        pool = enumerate_tours_unit(instance, k, budget)
    else:
        if k > 6:
            raise BudgetExceededError(f"k={k} above the enumeration guard of 6", size=k, budget=6)
        pool = _enumerate_feasible(instance, k, budget)
    fractional = solve_setcover_lp(pool)
    if gamma is None:
        gamma = gamma_recipe(k)
    outcome = round_tours(
        pool,
        fractional,
        gamma,
        mode=mode,
        seed=seed,
        uncovered_penalty=tree_rounding_penalty(instance, view),
    )

    residual = tuple(v for v in instance.customers if v in outcome.uncovered)
    tours = list(outcome.chosen)
    residual_delta = 0.0
    residual_tree_cost = 0.0
    if residual:
        sub = instance.restrict(residual)
        sub_view = build_super_depot(sub)
        residual_delta = sub_view.delta
        half = k // 2
        rest_idx = [i for i in range(sub.n) if sub.demand_array[i] <= half]
        if rest_idx:
            residual_tree_cost = restricted_mst(sub_view, rest_idx).cost
        tours.extend(refined_tree_partition(sub, sub_view).tours)

    return LpTreeResult(
        solution=Solution.from_tours(tours),
        gamma=float(gamma),
        kappa=2.0 / (k // 2 + 1),
        lp_objective=fractional.objective,
        instance_delta=view.delta,
        rounding=outcome,
        residual_customers=residual,
        residual_delta=residual_delta,
        residual_tree_cost=residual_tree_cost,
    )


# --------------------------------------------------------------------------
# LP-based cycle partition (unsplittable)
# --------------------------------------------------------------------------

def delta_uitp_split(
    view: SuperDepotView,
    cycle: HamCycle,
    k: int,
    delta: float,
    residual: Sequence,
) -> Solution:
    """Capacity-(1-delta)k splitting of the cycle restricted to ``residual``.

    Big customers (demand >= delta k) count double while filling, so the
    per-run cost is at most
    ``(2/k) delta_small/(1-delta) + (4/k) delta_big/(1-delta) + c(shortcut cycle)``.
    Cut positions range over the whole real interval; only the breakpoints
    where a cut crosses a customer boundary matter, so those (plus midpoints)
    are enumerated.
    """
    inst = view.instance
    h = view.h_instance()
    dem = inst.demand_array
    cidx = inst._customer_index
    res_idx = [cidx[v] for v in residual]
    q = (1.0 - delta) * k

    def eff(i: int) -> float:
        d = float(dem[i])
        return 2.0 * d if d >= delta * k - _EPS else d

    keep = set(res_idx) | {view.o_index}
    sub_cycle = shortcut_cycle(view.reduced_weights, cycle, keep)
    order = list(sub_cycle.order)
    pos = order.index(view.o_index)
    order = order[pos + 1 :] + order[:pos]

    tours = []
    fill_order = []
    for i in order:
        if eff(i) >= q - _EPS:
            tours.append(make_tour(h, view.o_id, [(inst.customers[i], int(dem[i]))]))
        else:
            fill_order.append(i)

    if fill_order:
        loads = {i: eff(i) for i in fill_order}
        prefix = np.cumsum([loads[i] for i in fill_order])
        breaks = sorted({q} | {float(s % q) if s % q > _EPS else q for s in prefix})
        candidates = sorted(
            set(breaks) | {0.5 * (a + b) for a, b in zip([0.0] + breaks, breaks) if b - a > _EPS}
        )
        c = view.reduced_weights
        o = view.o_index
        best_segs, best_cost = None, np.inf
        for t in candidates:
            segs = _whole_assign(fill_segments(fill_order, loads, q, t))
            cost = sum(
                c[o, s[0][0]]
                + sum(c[a[0], b[0]] for a, b in zip(s, s[1:]))
                + c[s[-1][0], o]
                for s in segs
            )
            if cost < best_cost - _EPS:
                best_segs, best_cost = segs, cost
        for seg in best_segs:
            visits = [(inst.customers[i], int(dem[i])) for i, _ in seg]
            assert sum(a for _, a in visits) <= k, "delta-UITP segment above capacity"
            tours.append(make_tour(h, view.o_id, visits))
    return Solution.from_tours(tours)


@dataclass(frozen=True)
class LpCycleResult:
    """LP cycle algorithm output plus its certificate pieces.

    The per-run guarantee is ``ln2 * OPT + fixed_bound`` with the exact
    optimum supplied externally (desk-scale oracle).
    """

    solution: Solution
    delta: float
    gamma: float
    lp_objective: float
    rounding: RoundingOutcome | None
    residual_customers: tuple
    fixed_bound: float  # (1/(1-delta)) (2/k) delta_total + 2 c(C)
    opt_coefficient: float  # ln 2

    def guarantee_value(self, opt: float) -> float:
        return self.opt_coefficient * opt + self.fixed_bound


def lp_cycle_partition(
    instance: Instance,
    view: SuperDepotView,
    cycle: HamCycle,
    delta: float = 0.25,
    mode: str = "derandomized",
    seed: int | None = None,
    budget: int = ENUMERATION_BUDGET,
) -> LpCycleResult:
    """Round a covering LP over big-customer tours, then run delta-UITP.

    Unsplittable demands, even capacity.  Rounding intensity is ``ln 2``; the
    derandomized estimator uses uncovered penalties
    ``(1/(1-delta)) (4/k) d(v) c(o,v)`` so the full certificate holds per run.
    """
    if instance.variant != "unsplittable":
        raise InvalidInstanceError("the LP cycle algorithm handles unsplittable demands")
    k = instance.capacity
    if k % 2:
        raise ValueError("even k required for unsplittable cycle partitioning")
    gamma = math.log(2.0)

    big = [v for v in instance.customers if instance.demands[v] >= delta * k - _EPS]
    outcome = None
    lp_objective = 0.0
    tours: list[Tour] = []
    uncovered_big: set = set(big)
    if big:
        pool = enumerate_big_tours(instance, view, delta, budget)
        fractional = solve_setcover_lp(pool)
        lp_objective = fractional.objective
        c_o = view.depot_distance
        penalty = {
            v: (1.0 / (1.0 - delta))
            * (4.0 / k)
            * instance.demands[v]
            * float(c_o[instance._customer_index[v]])
            for v in big
        }
        outcome = round_tours(
            pool, fractional, gamma, mode=mode, seed=seed, uncovered_penalty=penalty
        )
        tours.extend(outcome.chosen)
        uncovered_big = set(outcome.uncovered)

    big_set = set(big)
    residual = tuple(
        v for v in instance.customers if v not in big_set or v in uncovered_big
    )
    if residual:
        h_sol = delta_uitp_split(view, cycle, k, delta, residual)
        tours.extend(expand_to_depots(instance, view, h_sol).tours)

    fixed_bound = (1.0 / (1.0 - delta)) * (2.0 / k) * view.delta + 2.0 * cycle.cost
    return LpCycleResult(
        solution=Solution.from_tours(tours),
        delta=float(delta),
        gamma=gamma,
        lp_objective=lp_objective,
        rounding=outcome,
        residual_customers=residual,
        fixed_bound=float(fixed_bound),
        opt_coefficient=gamma,
    )
