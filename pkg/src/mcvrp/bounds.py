"""Lower bounds, exact optima at desk scale, and the run-all portfolio.

The lower-bound chain used throughout: the optimal reduced-graph Hamiltonian
cycle, the reduced-graph spanning tree, and ``(2/k) * delta`` all bound the
optimum from below.  The exact oracle solves tiny instances by subset dynamic
programming over customer sets with exact per-block tours.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import _backend
from .errors import BudgetExceededError, InvalidInstanceError
from .instance import (
    Instance,
    Solution,
    SuperDepotView,
    build_super_depot,
    fold_solution,
    make_tour,
    unitize,
    validate_solution,
)
from .partition import (
    cycle_partition_certificate,
    cycle_partition_mcvrp,
    refined_tree_partition,
    tree_partition_certificate,
)
from .ratios import fixed_k_ratio, gamma_recipe, tradeoff_ratio  # noqa: F401 (re-export)
from .setcover import lp_cycle_partition, lp_tree_partition
from .tsp import EXACT_TSP_BUDGET, HamCycle, christofides, exact_tsp_small, mst

EXACT_OPT_BUDGET = 12
_BLOCK_BUDGET = 200_000


@dataclass(frozen=True)
class GuaranteeEntry:
    """One algorithm's proven per-run bound, evaluated numerically."""

    algorithm: str
    expression: str
    value: float
    cost: float

    @property
    def satisfied(self) -> bool:
        return self.cost <= self.value + 1e-9 * (1.0 + abs(self.value))

    def to_json_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "expression": self.expression,
            "value": self.value,
            "cost": self.cost,
            "satisfied": self.satisfied,
        }


@dataclass(frozen=True)
class Certificate:
    """Lower bounds plus per-algorithm guarantee evaluations."""

    delta_bound: float
    mst_bound: float
    tsp_exact: float | None = None
    exact_opt: float | None = None
    guarantees: tuple = ()
    errors: Mapping = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "delta_bound": self.delta_bound,
            "mst_bound": self.mst_bound,
            "tsp_exact": self.tsp_exact,
            "exact_opt": self.exact_opt,
            "guarantees": [g.to_json_dict() for g in self.guarantees],
            "errors": dict(self.errors),
        }

    @property
    def all_satisfied(self) -> bool:
        return all(g.satisfied for g in self.guarantees)


def lower_bounds(
    instance: Instance,
    view: SuperDepotView | None = None,
    tsp_budget: int = EXACT_TSP_BUDGET,
    opt_budget: int = EXACT_OPT_BUDGET,
) -> Certificate:
    """(2/k) * delta and the reduced-graph tree bound, plus exact values when tiny."""
    view = view or build_super_depot(instance)
    delta_bound = (2.0 / instance.capacity) * view.delta
    tree = mst(view.reduced_weights, range(instance.n + 1))
    tsp_exact = None
    if instance.n + 1 <= tsp_budget:
        tsp_exact = exact_tsp_small(view.reduced_weights, range(instance.n + 1)).cost
    exact = None
    try:
        exact = exact_opt_small(instance, budget=opt_budget).total_weight
    except (BudgetExceededError, InvalidInstanceError):
        pass
    return Certificate(
        delta_bound=delta_bound,
        mst_bound=tree.cost,
        tsp_exact=tsp_exact,
        exact_opt=exact,
    )


def exact_opt_small(instance: Instance, budget: int = EXACT_OPT_BUDGET) -> Solution:
    """Optimal solution by exhaustive cover of customer subsets.

    Unit and unsplittable variants are solved directly; splittable instances
    are unitized first (exact for integer data) and the solution folded back.
    """
    work = instance
    if instance.variant == "splittable":
        if max(instance.demands.values()) > instance.capacity:
            raise InvalidInstanceError("run preprocess_demands before the exact oracle")
        work = unitize(instance)
    n = work.n
    if n > budget:
        raise BudgetExceededError(
            f"{n} customers exceed the exact-optimum budget of {budget}", size=n, budget=budget
        )

    k = work.capacity
    dem = work.demand_array.astype(int)
    # enumerate feasible blocks (subsets servable by one tour)
    masks: list[int] = []
    best_depot: list[int] = []
    best_order: list[tuple] = []
    costs: list[float] = []

    def recurse(start: int, mask: int, load: int):
        for v in range(start, n):
            if load + dem[v] > k:
                continue
            m2 = mask | (1 << v)
            masks.append(m2)
            recurse(v + 1, m2, load + int(dem[v]))

    recurse(0, 0, 0)
    if len(masks) * work.m > _BLOCK_BUDGET:
        raise BudgetExceededError(
            f"{len(masks)} blocks x {work.m} depots exceed the oracle budget",
            size=len(masks) * work.m,
            budget=_BLOCK_BUDGET,
        )

    for bm in masks:
        members = [work.customers[i] for i in range(n) if bm >> i & 1]
        best = (np.inf, -1, ())
        for d_idx, depot in enumerate(work.depots):
            idx = [work.index_of(depot)] + [work.index_of(v) for v in members]
            cyc = exact_tsp_small(work.weights, idx)
            pos = cyc.order.index(idx[0])
            order = cyc.order[pos + 1 :] + cyc.order[:pos]
            if cyc.cost < best[0]:
                back = {work.index_of(v): v for v in members}
                best = (cyc.cost, d_idx, tuple(back[i] for i in order))
        costs.append(best[0])
        best_depot.append(best[1])
        best_order.append(best[2])

    total, chosen = _backend.cover_partition(
        n, np.array(masks, dtype=np.int64), np.array(costs, dtype=np.float64)
    )
    tours = []
    for b in chosen:
        depot = work.depots[best_depot[b]]
        visits = [(v, work.demands[v]) for v in best_order[b]]
        tours.append(make_tour(work, depot, visits))
    sol = Solution.from_tours(tours)
    assert abs(sol.total_weight - total) <= 1e-6 * (1.0 + total)
    if instance.variant == "splittable":
        sol = fold_solution(work, sol)
    return sol


# --------------------------------------------------------------------------
# portfolio
# --------------------------------------------------------------------------

def reduced_cycle(view: SuperDepotView) -> HamCycle:
    """Hamiltonian cycle of the reduced graph (3/2-approximate, exact when tiny)."""
    n = view.instance.n
    if n + 1 < 3:
        order = tuple(range(n + 1))
        c = view.reduced_weights
        return HamCycle(order=order, cost=float(2.0 * c[0, n]) if n == 1 else 0.0)
    return christofides(view.reduced_weights, range(n + 1))


@dataclass(frozen=True)
class PortfolioResult:
    solution: Solution
    algorithm: str
    certificate: Certificate
    candidate_costs: Mapping


def portfolio_solve(
    instance: Instance,
    view: SuperDepotView | None = None,
    gamma: float | None = None,
    delta: float = 0.25,
    mode: str = "derandomized",
    seed: int | None = 0,
    lp_budget: int = 1_000_000,
    opt_budget: int = EXACT_OPT_BUDGET,
) -> PortfolioResult:
    """Run every applicable algorithm, validate each, return the cheapest.

    The branch conditions of the trade-off guarantees depend on the unknown
    optimum, so all branches are executed and the minimum taken; the
    certificate records every candidate's cost and guarantee expression.
    """
    view = view or build_super_depot(instance)
    if max(instance.demands.values()) > instance.capacity:
        raise InvalidInstanceError("portfolio_solve expects a preprocessed instance")
    k = instance.capacity
    cycle = reduced_cycle(view)

    candidates: dict[str, Solution] = {}
    guarantees: list[GuaranteeEntry] = []
    errors: dict[str, str] = {}

    def attempt(name, fn):
        try:
            candidates[name] = fn()
        except Exception as exc:  # noqa: BLE001 - candidate failures are recorded
            errors[name] = f"{type(exc).__name__}: {exc}"

    attempt("cycle", lambda: cycle_partition_mcvrp(instance, view, cycle))
    attempt("tree", lambda: refined_tree_partition(instance, view))

    lp_tree_result = {}

    def run_lp_tree():
        work, work_view = instance, view
        if instance.variant == "splittable":
            work = unitize(instance)
            work_view = build_super_depot(work)
        res = lp_tree_partition(work, work_view, gamma=gamma, mode=mode, seed=seed, budget=lp_budget)
        lp_tree_result["res"] = res
        sol = res.solution
        if instance.variant == "splittable":
            sol = fold_solution(work, sol)
        return sol

    attempt("lp-tree", run_lp_tree)

    lp_cycle_result = {}

    def run_lp_cycle():
        res = lp_cycle_partition(
            instance, view, cycle, delta=delta, mode=mode, seed=seed, budget=lp_budget
        )
        lp_cycle_result["res"] = res
        return res.solution

    if instance.variant == "unsplittable" and k % 2 == 0:
        attempt("lp-cycle", run_lp_cycle)
    elif instance.variant == "unsplittable":
        errors["lp-cycle"] = "ValueError: even k required for unsplittable cycle partitioning"

    for name, sol in list(candidates.items()):
        report = validate_solution(instance, sol)
        if not report.ok:
            errors[name] = f"infeasible output: {report.violations[:3]}"
            del candidates[name]

    if not candidates:
        raise RuntimeError(f"every algorithm failed: {errors}")

    base = lower_bounds(instance, view, opt_budget=opt_budget)

    rate = 4.0 if instance.variant == "unsplittable" else 2.0
    if "cycle" in candidates:
        guarantees.append(
            GuaranteeEntry(
                algorithm="cycle",
                expression=f"({rate:g}/k)*delta + 2*c(C)",
                value=cycle_partition_certificate(instance, view, cycle),
                cost=candidates["cycle"].total_weight,
            )
        )
    if "tree" in candidates:
        guarantees.append(
            GuaranteeEntry(
                algorithm="tree",
                expression="2/(floor(k/2)+1)*delta + 2*c(T')",
                value=tree_partition_certificate(instance, view),
                cost=candidates["tree"].total_weight,
            )
        )
    if "lp-tree" in candidates and mode == "derandomized":
        res = lp_tree_result["res"]
        guarantees.append(
            GuaranteeEntry(
                algorithm="lp-tree",
                expression="gamma*LP + exp(-gamma)*kappa*delta + 2*c(residual T')",
                value=res.certificate_value,
                cost=candidates["lp-tree"].total_weight,
            )
        )
    if "lp-cycle" in candidates and mode == "derandomized" and base.exact_opt is not None:
        res = lp_cycle_result["res"]
        guarantees.append(
            GuaranteeEntry(
                algorithm="lp-cycle",
                expression="ln2*OPT + (1/(1-delta))*(2/k)*delta + 2*c(C)",
                value=res.guarantee_value(base.exact_opt),
                cost=candidates["lp-cycle"].total_weight,
            )
        )

    best_name = min(candidates, key=lambda s: (candidates[s].total_weight, s))
    certificate = Certificate(
        delta_bound=base.delta_bound,
        mst_bound=base.mst_bound,
        tsp_exact=base.tsp_exact,
        exact_opt=base.exact_opt,
        guarantees=tuple(guarantees),
        errors=errors,
    )
    return PortfolioResult(
        solution=candidates[best_name],
        algorithm=best_name,
        certificate=certificate,
        candidate_costs={name: sol.total_weight for name, sol in candidates.items()},
    )
