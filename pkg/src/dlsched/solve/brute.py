"""Exhaustive reference solver for tiny instances.

Enumerates every admissible site selection (per period), every assignment of
demands to selected lanes, and every service order within a lane. Each order
is timed at earliest slots: shifting a trip earlier never increases its
disutility (curves are non-decreasing) and never delays another trip, so the
earliest-slot timing of an order is optimal among all timings of that order.
"""
from __future__ import annotations

import itertools
import time
from typing import Dict, FrozenSet, List, Optional, Tuple

from ..core import Instance, TwoPeriodConfig
from ..schedule import Schedule, SearchStats, SolveResult, Status
from .common import INF, Lane, View

MAX_DEMANDS = 8
MAX_SITES = 4


class TooLargeError(ValueError):
    pass


def _selections(instance: Instance) -> List[Tuple[Tuple[int, int], ...]]:
    """All (site, type) sets matching the fleet counts with one type per site."""
    counts = instance.fleet.counts
    types = instance.fleet.active_types
    out = []

    def rec(ti: int, free: Tuple[int, ...], acc: Tuple[Tuple[int, int], ...]):
        if ti == len(types):
            out.append(tuple(sorted(acc)))
            return
        tau = types[ti]
        for combo in itertools.combinations(free, counts[tau]):
            rest = tuple(i for i in free if i not in combo)
            rec(ti + 1, rest, acc + tuple((i, tau) for i in combo))

    rec(0, tuple(range(instance.m)), ())
    return sorted(out)


def brute_force(
    instance: Instance,
    config: Optional[TwoPeriodConfig] = None,
    max_demands: int = MAX_DEMANDS,
    max_sites: int = MAX_SITES,
) -> SolveResult:
    if instance.n > max_demands or instance.m > max_sites:
        raise TooLargeError(
            f"brute force limited to {max_demands} demands and {max_sites} sites "
            f"(got {instance.n} and {instance.m})"
        )
    started = time.perf_counter()
    view = View(instance, config)
    if instance.uncoverable:
        return SolveResult(Status.INFEASIBLE, uncovered=instance.uncovered_demands, message="uncovered demands")

    lane_of = {(ln.site, ln.drone_type, ln.period): ln for ln in view.lanes}
    memo: Dict[Tuple[int, FrozenSet[int]], Tuple[float, Tuple[int, ...]]] = {}

    def best_order(lane: Lane, subset: FrozenSet[int]) -> Tuple[float, Tuple[int, ...]]:
        key = (lane.index, subset)
        if key not in memo:
            best = (INF, ())
            for perm in itertools.permutations(sorted(subset)):
                c = view.sequence_cost(lane, perm)
                if c < best[0]:
                    best = (c, perm)
            memo[key] = best
        return memo[key]

    singles = _selections(instance)
    if view.periods == 1:
        plans = [(sel,) for sel in singles]
    else:
        budget = 2 * config.relocation_budget
        plans = [(a, b) for a in singles for b in singles if len(set(a) ^ set(b)) <= budget]

    best_cost = INF
    best_plan = None
    evaluated = 0
    for plan in plans:
        lanes = [lane_of[(i, tau, d)] for d, sel in enumerate(plan, start=1) for i, tau in sel]
        options = [[ln for ln in lanes if ln.prow[k]] for k in range(instance.n)]
        if any(not o for o in options):
            continue
        for choice in itertools.product(*options):
            evaluated += 1
            groups: Dict[int, List[int]] = {}
            for k, ln in enumerate(choice):
                groups.setdefault(ln.index, []).append(k)
            total = 0.0
            orders = {}
            for li, ks in groups.items():
                c, order = best_order(view.lanes[li], frozenset(ks))
                total += c
                if total >= best_cost:
                    break
                orders[li] = order
            else:
                if total < best_cost:
                    best_cost = total
                    best_plan = (plan, orders)

    stats = SearchStats(nodes=evaluated, elapsed=time.perf_counter() - started)
    if best_plan is None:
        return SolveResult(Status.INFEASIBLE, stats=stats)
    plan, orders = best_plan
    # keep the enumerated selection rather than a re-padded one
    trips = [t for li, order in sorted(orders.items()) for t in view.trips(view.lanes[li], order)]
    sched = Schedule(plan, tuple(trips))
    return SolveResult(Status.OPTIMAL, best_cost, best_cost, sched, stats)
