"""Greedy construction plus first-improvement local search with seeded restarts."""
from __future__ import annotations

import random
import time
from typing import Dict, List, Optional, Set, Tuple

from ..core import Instance, TwoPeriodConfig
from ..schedule import SearchStats, SolveResult, Status
from .common import INF, View, relocations_needed

Score = Tuple[int, float]  # (overrun slots, disutility)


class _Fleet:
    """Which lanes may be opened given the lanes already in use."""

    def __init__(self, view: View):
        self.view = view
        self.counts = view.instance.fleet.counts
        self.two_period = view.periods == 2
        if self.two_period and len(view.types) != 1:
            raise NotImplementedError("two-period heuristic supports a single active drone type")
        self.Q = view.config.relocation_budget if self.two_period else 0
        self.p = view.instance.fleet.total

    def can_open(self, u: int, open_set: Set[int]) -> bool:
        if u in open_set:
            return True
        lanes = self.view.lanes
        ln = lanes[u]
        same = sum(1 for o in open_set if lanes[o].period == ln.period and lanes[o].drone_type == ln.drone_type)
        if same >= self.counts[ln.drone_type]:
            return False
        if any(lanes[o].site == ln.site and lanes[o].period == ln.period for o in open_set):
            return False
        if self.two_period:
            u1 = {lanes[o].site for o in open_set if lanes[o].period == 1}
            u2 = {lanes[o].site for o in open_set if lanes[o].period == 2}
            (u1 if ln.period == 1 else u2).add(ln.site)
            if relocations_needed(u1, u2, self.p, self.view.m) > self.Q:
                return False
        return True


def greedy_sequences(
    view: View, deadline: Optional[float] = None, allowed: Optional[Set[int]] = None
) -> Optional[Dict[int, List[int]]]:
    """Repeatedly append the (demand, lane) pair with the smallest disutility at its next free slot.

    Demands that no longer fit anywhere are appended where they overrun the
    horizon least. Returns ``None`` if the deadline passes first and ``{}``
    if some demand cannot be placed at all.
    """
    fleet = _Fleet(view)
    if allowed is not None:
        fleet = _Restricted(fleet, allowed)
    s = view.s
    seqs: Dict[int, List[int]] = {}
    loads = {ln.index: ln.start for ln in view.lanes}
    unassigned = list(range(view.n))
    while unassigned:
        if deadline is not None and time.perf_counter() >= deadline:
            return None
        open_set = set(seqs)
        best = None
        usable = [ln for ln in view.lanes if fleet.can_open(ln.index, open_set)]
        for ln in usable:
            load = loads[ln.index]
            for k in unassigned:
                p = ln.prow[k]
                if not p:
                    continue
                r = load + s + p
                if r > ln.end:
                    continue
                key = (view.costs(k, r - p / 2), ln.index, k)
                if best is None or key < best:
                    best = key
        if best is None:
            for k in list(unassigned):
                open_set = set(seqs)
                cands = [
                    (loads[ln.index] + s + ln.prow[k] - ln.end, ln.index)
                    for ln in view.lanes
                    if ln.prow[k] and fleet.can_open(ln.index, open_set)
                ]
                if not cands:
                    cands = [(10**9, ln.index) for ln in view.lanes if ln.index in seqs and ln.prow[k]]
                if not cands:
                    return {}
                _, u = min(cands)
                seqs.setdefault(u, []).append(k)
                loads[u] += s + view.lanes[u].prow[k]
                unassigned.remove(k)
            break
        _, u, k = best
        seqs.setdefault(u, []).append(k)
        loads[u] += s + view.lanes[u].prow[k]
        unassigned.remove(k)
    return seqs


class _Restricted:
    def __init__(self, fleet: _Fleet, allowed: Set[int]):
        self.fleet = fleet
        self.allowed = allowed

    def can_open(self, u: int, open_set: Set[int]) -> bool:
        return u in self.allowed and self.fleet.can_open(u, open_set)


def cover_lanes(view: View) -> Set[int]:
    """Greedy set cover of the demands by lanes, topped up to the fleet size.

    Once everything is covered, lanes at sites already chosen on the other
    day are preferred, so two-period covers need few relocations.
    """
    fleet = _Fleet(view)
    chosen: Set[int] = set()
    todo = set(range(view.n))
    while True:
        best = None
        sites = {(view.lanes[u].site, view.lanes[u].drone_type, view.lanes[u].period) for u in chosen}
        for ln in view.lanes:
            if ln.index in chosen or not fleet.can_open(ln.index, chosen):
                continue
            gain = sum(1 for k in todo if ln.prow[k])
            mirror = (ln.site, ln.drone_type, 3 - ln.period) in sites
            reach = sum(1 for v in ln.prow if v)
            key = (-gain, -mirror, -reach, ln.index)
            if best is None or key < best:
                best = key
        if best is None:
            break
        u = best[-1]
        chosen.add(u)
        todo -= {k for k in todo if view.lanes[u].prow[k]}
    return chosen


def construct(view: View, deadline: Optional[float] = None) -> Optional[Dict[int, List[int]]]:
    """Best of the unrestricted greedy and the greedy restricted to a covering site set."""
    best, best_score = None, None
    for allowed in (None, cover_lanes(view)):
        seqs = greedy_sequences(view, deadline, allowed)
        if seqs is None:
            return best
        if sum(len(q) for q in seqs.values()) != view.n:
            continue
        score = _State(view, seqs).score()
        if best is None or _better(score, best_score):
            best, best_score = seqs, score
    return best if best is not None else {}


class _State:
    def __init__(self, view: View, seqs: Dict[int, List[int]]):
        self.view = view
        self.seqs = {u: list(q) for u, q in seqs.items() if q}
        self.ev = {u: view.sequence_eval(view.lanes[u], q) for u, q in self.seqs.items()}

    def copy(self) -> "_State":
        other = _State.__new__(_State)
        other.view = self.view
        other.seqs = {u: list(q) for u, q in self.seqs.items()}
        other.ev = dict(self.ev)
        return other

    def score(self) -> Score:
        over = sum(o for o, _ in self.ev.values())
        cost = sum(c for _, c in self.ev.values())
        return over, cost

    def eval(self, u: int, seq: List[int]) -> Score:
        if not seq:
            return (0, 0.0)
        return self.view.sequence_eval(self.view.lanes[u], seq)

    def set(self, u: int, seq: List[int], ev: Score):
        if seq:
            self.seqs[u] = seq
            self.ev[u] = ev
        else:
            self.seqs.pop(u, None)
            self.ev.pop(u, None)


def _better(new: Score, old: Score) -> bool:
    return new[0] < old[0] or (new[0] == old[0] and new[1] < old[1] - 1e-12)


def _add(a: Score, b: Score) -> Score:
    return a[0] + b[0], a[1] + b[1]


def _best_insertion(st: _State, fleet: _Fleet, k: int, open_set: Set[int], skip: Optional[int] = None):
    best = None
    for ln in st.view.lanes:
        u = ln.index
        if not ln.prow[k] or u == skip or not fleet.can_open(u, open_set):
            continue
        seq = st.seqs.get(u, [])
        old = st.ev.get(u, (0, 0.0))
        for pos in range(len(seq) + 1):
            cand = seq[:pos] + [k] + seq[pos:]
            ev = st.eval(u, cand)
            delta = (ev[0] - old[0], ev[1] - old[1])
            if best is None or _better(delta, best[0]):
                best = (delta, u, cand, ev)
    return best


def _relocate_pass(st: _State, fleet: _Fleet, deadline) -> bool:
    improved = False
    for k in range(st.view.n):
        if deadline is not None and time.perf_counter() >= deadline:
            return improved
        src = next(u for u, q in st.seqs.items() if k in q)
        seq = st.seqs[src]
        rest = [x for x in seq if x != k]
        rest_ev = st.eval(src, rest)
        old_src = st.ev[src]
        open_set = set(st.seqs) - ({src} if not rest else set())
        # reinsertion within the source lane
        best = None
        for pos in range(len(rest) + 1):
            cand = rest[:pos] + [k] + rest[pos:]
            if cand == seq:
                continue
            ev = st.eval(src, cand)
            delta = (ev[0] - old_src[0], ev[1] - old_src[1])
            if best is None or _better(delta, best[0]):
                best = (delta, src, cand, ev)
        # move to another lane
        tmp = st.copy()
        tmp.set(src, rest, rest_ev)
        ins = _best_insertion(tmp, fleet, k, open_set, skip=src)
        if ins is not None:
            delta = (ins[0][0] + rest_ev[0] - old_src[0], ins[0][1] + rest_ev[1] - old_src[1])
            if best is None or _better(delta, best[0]):
                best = (delta, ins[1], ins[2], ins[3])
        if best is not None and _better(best[0], (0, 0.0)):
            _, u, cand, ev = best
            if u != src:
                st.set(src, rest, rest_ev)
            st.set(u, cand, ev)
            improved = True
    return improved


def _swap_pass(st: _State, deadline) -> bool:
    improved = False
    lanes = sorted(st.seqs)
    for a_i, a in enumerate(lanes):
        for b in lanes[a_i + 1 :]:
            if deadline is not None and time.perf_counter() >= deadline:
                return improved
            if a not in st.seqs or b not in st.seqs:
                continue
            qa, qb = st.seqs[a], st.seqs[b]
            la, lb = st.view.lanes[a], st.view.lanes[b]
            base = _add(st.ev[a], st.ev[b])
            done = False
            for i, ka in enumerate(qa):
                if not lb.prow[ka]:
                    continue
                for j, kb in enumerate(qb):
                    if not la.prow[kb]:
                        continue
                    na = qa[:i] + [kb] + qa[i + 1 :]
                    nb = qb[:j] + [ka] + qb[j + 1 :]
                    ea, eb = st.eval(a, na), st.eval(b, nb)
                    if _better(_add(ea, eb), base):
                        st.set(a, na, ea)
                        st.set(b, nb, eb)
                        improved = done = True
                        break
                if done:
                    break
    return improved


def _twin_lane(view: View, u: int) -> Optional[int]:
    """The lane at the same site and type on the other day, if any."""
    if view.periods == 1:
        return None
    ln = view.lanes[u]
    for other in view.lanes:
        if other.site == ln.site and other.drone_type == ln.drone_type and other.period != ln.period:
            return other.index
    return None


def _move_lanes(st: _State, fleet: _Fleet, pairs: List[Tuple[int, int]]) -> Optional[_State]:
    """Move each open lane ``a`` to closed lane ``b``; demands ``b`` cannot reach are reinserted elsewhere."""
    view = st.view
    new = st.copy()
    moved = [(b, new.seqs[a]) for a, b in pairs]
    for a, _ in pairs:
        new.set(a, [], (0, 0.0))
    displaced = []
    for b, seq in moved:
        if b in new.seqs:
            return None
        kept = [k for k in seq if view.lanes[b].prow[k]]
        displaced.extend(k for k in seq if not view.lanes[b].prow[k])
        if not kept:
            continue  # left closed; reinsertion below may still open it
        if not fleet.can_open(b, set(new.seqs)):
            return None
        new.set(b, kept, new.eval(b, kept))
    for k in displaced:
        ins = _best_insertion(new, fleet, k, set(new.seqs))
        if ins is None:
            return None
        _, w, cand, ev = ins
        new.set(w, cand, ev)
    return new


def _swap_site(st: _State, fleet: _Fleet, u: int, v: int) -> Optional[_State]:
    """Close lane ``u`` and open ``v``; on two-day instances a site used on both days moves on both days."""
    pairs = [(u, v)]
    tu, tv = _twin_lane(st.view, u), _twin_lane(st.view, v)
    if tu is not None and tu in st.seqs and tv is not None and tv not in st.seqs:
        pairs.append((tu, tv))
    return _move_lanes(st, fleet, pairs)


def _day_exchange_pass(st: _State, fleet: _Fleet, deadline) -> Tuple[_State, bool]:
    """Two-day move: a day-1 site and a day-2 site trade places."""
    view = st.view
    if view.periods == 1:
        return st, False
    improved = False
    for u in sorted(st.seqs):
        for w in sorted(st.seqs):
            if deadline is not None and time.perf_counter() >= deadline:
                return st, improved
            if u not in st.seqs or w not in st.seqs:
                continue
            lu, lw = view.lanes[u], view.lanes[w]
            if lu.period != 1 or lw.period != 2 or lu.site == lw.site or lu.drone_type != lw.drone_type:
                continue
            a, b = _twin_lane(view, w), _twin_lane(view, u)
            if a in st.seqs or b in st.seqs:
                continue
            cand = _move_lanes(st, fleet, [(u, a), (w, b)])
            if cand is not None and _better(cand.score(), st.score()):
                st, improved = cand, True
    return st, improved


def _site_swap_pass(st: _State, fleet: _Fleet, deadline) -> Tuple[_State, bool]:
    improved = False
    for u in sorted(st.seqs):
        if deadline is not None and time.perf_counter() >= deadline:
            return st, improved
        if u not in st.seqs:
            continue
        lu = st.view.lanes[u]
        base = st.score()
        for ln in st.view.lanes:
            v = ln.index
            if v in st.seqs or ln.period != lu.period or ln.drone_type != lu.drone_type:
                continue
            cand = _swap_site(st, fleet, u, v)
            if cand is not None and _better(cand.score(), base):
                st = cand
                improved = True
                break
    return st, improved


def local_search(st: _State, fleet: _Fleet, deadline=None) -> _State:
    while True:
        if deadline is not None and time.perf_counter() >= deadline:
            return st
        changed = _relocate_pass(st, fleet, deadline)
        changed |= _swap_pass(st, deadline)
        st, swapped = _site_swap_pass(st, fleet, deadline)
        changed |= swapped
        st, swapped = _day_exchange_pass(st, fleet, deadline)
        changed |= swapped
        if not changed:
            return st


def _perturb(st: _State, fleet: _Fleet, rng: random.Random, strength: int) -> _State:
    new = st.copy()
    if rng.random() < 0.5:
        # random site exchange
        u = rng.choice(sorted(new.seqs))
        lu = new.view.lanes[u]
        closed = [
            ln.index
            for ln in new.view.lanes
            if ln.index not in new.seqs and ln.period == lu.period and ln.drone_type == lu.drone_type
        ]
        if closed:
            swapped = _swap_site(new, fleet, u, rng.choice(closed))
            if swapped is not None:
                new = swapped
    victims = rng.sample(range(new.view.n), min(rng.randint(2, max(2, strength)), new.view.n))
    for k in victims:
        src = next(u for u, q in new.seqs.items() if k in q)
        rest = [x for x in new.seqs[src] if x != k]
        new.set(src, rest, new.eval(src, rest))
    for k in victims:
        ins = _best_insertion(new, fleet, k, set(new.seqs))
        if ins is None:
            # every usable lane is blocked; fall back to any open lane covering k
            for u in sorted(new.seqs):
                if new.view.lanes[u].prow[k]:
                    q = new.seqs[u] + [k]
                    new.set(u, q, new.eval(u, q))
                    break
            else:
                return st.copy()
            continue
        _, u, cand, ev = ins
        new.set(u, cand, ev)
    return new


def improve(
    view: View,
    restarts: int = 20,
    seed: int = 0,
    deadline: Optional[float] = None,
    strength: Optional[int] = None,
    stats: Optional[SearchStats] = None,
) -> Optional[Dict[int, List[int]]]:
    """Construction, local search and perturbation restarts; ``None`` if no complete assignment was built.

    The returned sequences may still overrun the horizon.
    """
    stats = stats if stats is not None else SearchStats()
    fleet = _Fleet(view)
    rng = random.Random(seed)
    seqs = construct(view, deadline)
    if seqs is None or (not seqs and view.n):
        return None
    best = local_search(_State(view, seqs), fleet, deadline)
    stats.incumbent_updates += 1
    strength = strength or max(3, view.n // 6)
    for _ in range(restarts):
        if deadline is not None and time.perf_counter() >= deadline:
            break
        stats.nodes += 1
        cand = local_search(_perturb(best, fleet, rng, strength), fleet, deadline)
        if _better(cand.score(), best.score()):
            best = cand
            stats.incumbent_updates += 1
    return best.seqs


def solve_heuristic(
    instance: Instance,
    config: Optional[TwoPeriodConfig] = None,
    restarts: int = 20,
    seed: int = 0,
    time_limit: Optional[float] = None,
    strength: Optional[int] = None,
) -> SolveResult:
    """Anytime heuristic; never claims optimality.

    ``restarts`` bounds the work deterministically; ``time_limit`` is a hard
    cap that may cut a run short (and then results depend on machine speed).
    """
    from .exact import root_bound

    started = time.perf_counter()
    deadline = started + time_limit if time_limit is not None else None
    stats = SearchStats()
    if instance.uncoverable:
        return SolveResult(
            Status.INFEASIBLE, stats=stats, uncovered=instance.uncovered_demands, message="uncovered demands"
        )
    view = View(instance, config)
    seqs = improve(view, restarts, seed, deadline, strength, stats)
    lb = root_bound(view)
    lb = None if lb == INF else lb
    stats.elapsed = time.perf_counter() - started
    if seqs is None:
        return SolveResult(Status.UNKNOWN, None, lb, None, stats, message="construction failed")
    over, cost = _State(view, seqs).score()
    if over:
        return SolveResult(Status.UNKNOWN, None, lb, None, stats, message="no feasible schedule found")
    return SolveResult(Status.FEASIBLE, cost, min(lb, cost), view.schedule(seqs), stats)
