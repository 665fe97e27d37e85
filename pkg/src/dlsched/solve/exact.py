"""Depth-first branch and bound over lane sequences.

Search: at every node the open lane with the smallest current load (ties by
lane index) is extended, either by appending one unassigned demand at its
earliest slot or by closing the lane. Each schedule built from earliest-slot
sequences is reached exactly once.

Bound: committed cost plus a minimum-cost assignment of the unassigned
demands to lane *positions*. The j-th additional trip of a lane with load L
delivers no earlier than ``L + j*s + (sum of the j-1 smallest remaining
roundtrips) + p/2``, so pricing each demand at that time is admissible.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from ..core import Instance, TwoPeriodConfig
from ..schedule import SearchStats, SolveResult, Status
from .common import INF, View, relocations_needed

BIG = 1e12
UNTOUCHED, OPEN, CLOSED, DONE = 0, 1, 2, 3  # DONE: used, then closed
USED = (OPEN, DONE)


@dataclass
class _Node:
    loads: Tuple[int, ...]
    status: Tuple[int, ...]
    first: Tuple[int, ...]
    last: Tuple[int, ...]  # last demand per lane, -1 if none
    before: Tuple[int, ...]  # lane load before its last trip
    unassigned: Tuple[int, ...]
    cost: float
    trail: Optional[tuple]
    bound: float = 0.0


class _Search:
    def __init__(self, view: View, symmetry: bool = True):
        self.view = view
        inst = view.instance
        self.lanes = view.lanes
        self.L = len(self.lanes)
        self.s = view.s
        self.counts = inst.fleet.counts
        self.two_period = view.periods == 2
        if self.two_period and len(view.types) != 1:
            raise NotImplementedError("two-period search supports a single active drone type")
        self.Q = view.config.relocation_budget if self.two_period else 0
        self.p = inst.fleet.total
        self.prow = [np.asarray(ln.prow, dtype=float) for ln in self.lanes]
        self.siblings = [
            [o.index for o in self.lanes if o.site == ln.site and o.period == ln.period and o.index != ln.index]
            for ln in self.lanes
        ]
        self.twin: List[Optional[int]] = [None] * self.L
        if symmetry and not self.two_period and len(view.types) == 1:
            for ln in self.lanes:
                for prev in reversed(self.lanes[: ln.index]):
                    if prev.drone_type == ln.drone_type and prev.prow == ln.prow:
                        self.twin[ln.index] = prev.index
                        break

    # -- feasibility of opening a lane --------------------------------------

    def used(self, status, period: int, tau: int) -> int:
        return sum(
            1 for ln in self.lanes if status[ln.index] in USED and ln.period == period and ln.drone_type == tau
        )

    def can_open(self, node: _Node, u: int) -> bool:
        st = node.status
        if st[u] != UNTOUCHED:
            return False
        ln = self.lanes[u]
        if self.used(st, ln.period, ln.drone_type) >= self.counts[ln.drone_type]:
            return False
        if any(st[o] in USED for o in self.siblings[u]):
            return False
        tw = self.twin[u]
        if tw is not None and st[tw] not in USED:
            return False
        if self.two_period:
            u1 = {x.site for x in self.lanes if st[x.index] in USED and x.period == 1}
            u2 = {x.site for x in self.lanes if st[x.index] in USED and x.period == 2}
            (u1 if ln.period == 1 else u2).add(ln.site)
            if relocations_needed(u1, u2, self.p, self.view.m) > self.Q:
                return False
        return True

    def available(self, node: _Node) -> List[int]:
        return [u for u in range(self.L) if node.status[u] == OPEN or self.can_open(node, u)]

    # -- bounding -------------------------------------------------------------

    def _positions(self, node: _Node, u: int, ks: np.ndarray):
        """Cost of each unassigned demand at each further position of lane ``u`` (BIG if impossible)."""
        ln = self.lanes[u]
        p = self.prow[u][ks]
        cov = p > 0
        if not cov.any():
            return None
        ps = np.sort(p[cov])
        npos = min(len(ps), len(ks))
        cum = np.concatenate(([0.0], np.cumsum(ps)))
        j = np.arange(1, npos + 1)
        base = node.loads[u] + j * self.s + cum[:npos]  # before adding the demand's own roundtrip
        ret = base[None, :] + p[:, None]
        ok = cov[:, None] & (ret <= ln.end)
        if not ok.any():
            return None
        vals = self.view.costs.rows(ks, np.maximum(ret - p[:, None] / 2, 0.0))
        return np.where(ok, vals, BIG)

    def bound(self, node: _Node, incumbent: float) -> float:
        """Committed cost plus an assignment of unassigned demands to lane positions.

        Lanes that are not yet open are pooled per (period, type): at most
        ``R`` of them can still open, so ``R`` copies of the position-wise
        cheapest untouched lane relax them admissibly.
        """
        if not node.unassigned:
            return node.cost
        ks = np.asarray(node.unassigned)
        r = len(ks)
        blocks = []
        pools: Dict[Tuple[int, int], List[np.ndarray]] = {}
        for u in self.available(node):
            C = self._positions(node, u, ks)
            if C is None:
                continue
            if node.status[u] == OPEN:
                blocks.append(C)
            else:
                ln = self.lanes[u]
                pools.setdefault((ln.period, ln.drone_type), []).append(C)
        for (period, tau), mats in pools.items():
            room = self.counts[tau] - self.used(node.status, period, tau)
            width = max(M.shape[1] for M in mats)
            best = np.full((r, width), BIG)
            for M in mats:
                np.minimum(best[:, : M.shape[1]], M, out=best[:, : M.shape[1]])
            blocks.extend([best] * min(room, len(mats)))
        if not blocks:
            return INF
        C = np.hstack(blocks)
        mins = C.min(axis=1)
        if mins.max() >= BIG or C.shape[1] < r:
            return INF
        cheap = node.cost + float(mins.sum())
        if cheap >= incumbent:
            return cheap
        rows, cols = linear_sum_assignment(C)
        chosen = C[rows, cols]
        if chosen.max() >= BIG:
            return INF
        return node.cost + float(chosen.sum())

    # -- branching -------------------------------------------------------------

    def select(self, node: _Node) -> Optional[int]:
        best = None
        for u in self.available(node):
            key = (node.loads[u], u)
            if best is None or key < best[0]:
                best = (key, u)
        return None if best is None else best[1]

    def children(self, node: _Node, u: int) -> List[_Node]:
        ln = self.lanes[u]
        load = node.loads[u]
        min_first = -1
        tw = self.twin[u]
        if node.status[u] == UNTOUCHED and tw is not None:
            min_first = node.first[tw]
        out = []
        j = node.last[u]
        for k in node.unassigned:
            p = ln.prow[k]
            if not p or k <= min_first:
                continue
            ret = load + self.s + p
            if ret > ln.end:
                continue
            if j >= 0 and self.dominated(u, node.before[u], j, k):
                continue
            loads = list(node.loads)
            loads[u] = ret
            status = list(node.status)
            first = node.first
            if status[u] == UNTOUCHED:
                status[u] = OPEN
                first = list(first)
                first[u] = k
                first = tuple(first)
            last = list(node.last)
            last[u] = k
            before = list(node.before)
            before[u] = load
            out.append(
                _Node(
                    tuple(loads),
                    tuple(status),
                    first,
                    tuple(last),
                    tuple(before),
                    tuple(x for x in node.unassigned if x != k),
                    node.cost + self.view.costs(k, ret - p / 2),
                    (u, k, node.trail),
                )
            )
        status = list(node.status)
        status[u] = DONE if status[u] == OPEN else CLOSED
        out.append(
            _Node(node.loads, tuple(status), node.first, node.last, node.before, node.unassigned, node.cost, node.trail)
        )
        return out

    def dominated(self, u: int, start: int, j: int, k: int) -> bool:
        """True if flying ``k`` before ``j`` (same end load) is strictly better, or tied with ``k < j``.

        Exchanging two adjacent trips leaves every later trip untouched, so
        some optimal schedule has no adjacent pair that this rule rejects.
        """
        prow = self.lanes[u].prow
        pj, pk = prow[j], prow[k]
        s = self.s
        c = self.view.costs
        jk = c(j, start + s + pj / 2) + c(k, start + 2 * s + pj + pk / 2)
        kj = c(k, start + s + pk / 2) + c(j, start + 2 * s + pk + pj / 2)
        return kj < jk - 1e-12 or (abs(kj - jk) <= 1e-12 and k < j)

    def sequences(self, trail) -> Dict[int, List[int]]:
        seqs: Dict[int, List[int]] = {}
        items = []
        while trail is not None:
            u, k, trail = trail
            items.append((u, k))
        for u, k in reversed(items):
            seqs.setdefault(u, []).append(k)
        return seqs


def _root(view: View, L: int) -> _Node:
    starts = tuple(ln.start for ln in view.lanes)
    return _Node(starts, (UNTOUCHED,) * L, (-1,) * L, (-1,) * L, starts, tuple(range(view.n)), 0.0, None)


def root_bound(view: View) -> float:
    """Lower bound on the optimum before any branching (``inf`` proves infeasibility)."""
    search = _Search(view, symmetry=False)
    return search.bound(_root(view, search.L), INF)


def _solve_mixed_two_period(
    instance: Instance, config: TwoPeriodConfig, time_limit: Optional[float], started: float
) -> SolveResult:
    # the lane search has no relocation bound for several drone types; hand the ILP to HiGHS
    from ..ilp import build_mixed_fleet, decode, solve_milp

    model = build_mixed_fleet(instance, config)
    res = solve_milp(model, time_limit)
    stats = SearchStats(elapsed=time.perf_counter() - started)
    msg = "solved as an ILP"
    if res.status == "infeasible":
        return SolveResult(Status.INFEASIBLE, stats=stats, message=msg)
    if res.x is None:
        return SolveResult(Status.UNKNOWN, None, res.bound, None, stats, message=msg)
    sched = decode(model, instance, res.x)
    obj = float(model.value(res.x))
    status = Status.OPTIMAL if res.status == "optimal" else Status.FEASIBLE
    bound = obj if status is Status.OPTIMAL else (None if res.bound is None else min(res.bound, obj))
    stats.incumbent_updates = 1
    return SolveResult(status, obj, bound, sched, stats, message=msg)


def solve_exact(
    instance: Instance,
    config: Optional[TwoPeriodConfig] = None,
    time_limit: Optional[float] = None,
    node_limit: Optional[int] = None,
    seed_incumbent: bool = True,
    symmetry: bool = True,
    warm_restarts: int = 20,
    seed: int = 0,
) -> SolveResult:
    """Exact search; returns Optimal/Infeasible when the tree is exhausted within budget.

    With ``seed_incumbent`` the search starts from the heuristic's schedule
    (``warm_restarts`` restarts, at most a quarter of the time budget).
    """
    started = time.perf_counter()
    deadline = started + time_limit if time_limit is not None else None
    stats = SearchStats()
    if instance.uncoverable:
        return SolveResult(
            Status.INFEASIBLE, stats=stats, uncovered=instance.uncovered_demands, message="uncovered demands"
        )
    if config is not None and len(instance.fleet.active_types) > 1:
        return _solve_mixed_two_period(instance, config, time_limit, started)
    view = View(instance, config)
    search = _Search(view, symmetry)

    root = _root(view, search.L)
    root.bound = search.bound(root, INF)
    if root.bound == INF:
        stats.elapsed = time.perf_counter() - started
        return SolveResult(Status.INFEASIBLE, stats=stats, message="root relaxation infeasible")

    incumbent = INF
    best_seqs = None
    if seed_incumbent and (deadline is None or time.perf_counter() < deadline):
        from .heuristic import improve

        warm_deadline = None if time_limit is None else started + time_limit / 4
        seqs = improve(view, warm_restarts, seed, warm_deadline)
        if seqs:
            value = sum(view.sequence_cost(view.lanes[u], q) for u, q in seqs.items())
            if value < INF:
                incumbent, best_seqs = value, seqs
                stats.incumbent_updates += 1

    stack = [root]
    exhausted = True
    while stack:
        if (deadline is not None and time.perf_counter() >= deadline) or (
            node_limit is not None and stats.nodes >= node_limit
        ):
            exhausted = False
            break
        node = stack.pop()
        if node.bound >= incumbent:
            continue
        stats.nodes += 1
        u = search.select(node)
        if u is None:
            continue
        kids = []
        for child in search.children(node, u):
            if not child.unassigned:
                if child.cost < incumbent:
                    incumbent = child.cost
                    best_seqs = search.sequences(child.trail)
                    stats.incumbent_updates += 1
                continue
            child.bound = search.bound(child, incumbent)
            if child.bound < incumbent:
                kids.append(child)
        kids.sort(key=lambda c: c.bound)
        stack.extend(reversed(kids))

    stats.elapsed = time.perf_counter() - started
    if exhausted:
        if best_seqs is None:
            return SolveResult(Status.INFEASIBLE, stats=stats, lower_bound=None)
        return SolveResult(Status.OPTIMAL, incumbent, incumbent, view.schedule(best_seqs), stats)
    # root bound and the frontier minimum are both valid; keep the larger
    frontier = min([n.bound for n in stack] + [incumbent])
    lb = root.bound if frontier == INF else max(root.bound, frontier)
    lb = min(lb, incumbent)
    if best_seqs is None:
        return SolveResult(Status.UNKNOWN, None, lb, None, stats, message="budget exhausted")
    return SolveResult(Status.FEASIBLE, incumbent, lb, view.schedule(best_seqs), stats, message="budget exhausted")
