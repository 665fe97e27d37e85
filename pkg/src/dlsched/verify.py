"""Schedule feasibility checks, objective recomputation and reporting metrics.

Deliberately written without reference to the ILP builder so the two can be
checked against each other.
"""
from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .core import Instance, TimeGrid, TwoPeriodConfig, eval_disutility
from .schedule import Schedule

FAMILIES = ("Assign", "Coverage", "Link", "Capacity", "FirstFlight", "Count", "RelocBudget", "Horizon")


@dataclass(frozen=True)
class Violation:
    family: str
    entities: Tuple
    detail: str


@dataclass
class ValidationReport:
    violations: List[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def families(self) -> set:
        return {v.family for v in self.violations}

    def add(self, family: str, entities, detail: str):
        self.violations.append(Violation(family, tuple(entities), detail))

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "violations": [
                {"family": v.family, "entities": list(v.entities), "detail": v.detail} for v in self.violations
            ],
        }


class InvalidScheduleError(ValueError):
    pass


def validate(instance: Instance, schedule: Schedule, config: Optional[TwoPeriodConfig] = None) -> ValidationReport:
    rep = ValidationReport()
    grid = instance.grid
    s = instance.setup_slots
    ntypes = len(instance.fleet.drone_types)

    if len(schedule.selected) != grid.periods:
        rep.add("Count", (), f"expected site selections for {grid.periods} period(s), got {len(schedule.selected)}")

    # Count: per period and type exactly N_tau units, one drone type per site
    for d, sel in enumerate(schedule.selected[: grid.periods], start=1):
        by_type = Counter(tau for _, tau in sel)
        for tau, want in enumerate(instance.fleet.counts):
            if by_type.get(tau, 0) != want:
                rep.add("Count", (d, tau), f"period {d}: {by_type.get(tau, 0)} sites of type {tau}, need {want}")
        per_site = Counter(i for i, _ in sel)
        for i, c in sorted(per_site.items()):
            if c > 1 or not 0 <= i < instance.m:
                rep.add("Count", (d, i), f"period {d}: site {i} selected {c} times or unknown")
        for i, tau in sel:
            if not 0 <= tau < ntypes:
                rep.add("Count", (d, i, tau), f"period {d}: unknown drone type {tau}")

    if grid.periods == 2:
        if config is None:
            rep.add("RelocBudget", (), "two-period schedule checked without a relocation budget")
        elif len(schedule.selected) == 2:
            moved = set(schedule.selected[0]) ^ set(schedule.selected[1])
            if len(moved) > 2 * config.relocation_budget:
                rep.add(
                    "RelocBudget",
                    tuple(sorted(moved)),
                    f"{len(moved) // 2} relocations exceed budget {config.relocation_budget}",
                )

    served = Counter()
    lanes: Dict[Tuple[int, int, int], List[Tuple[int, int]]] = defaultdict(list)
    for trip in schedule.trips:
        key = (trip.demand, trip.site, trip.return_slot)
        served[trip.demand] += 1
        if not (0 <= trip.demand < instance.n and 0 <= trip.site < instance.m and 0 <= trip.drone_type < ntypes):
            rep.add("Coverage", key, "trip refers to an unknown demand, site or drone type")
            continue
        p = instance.p_ik(trip.drone_type, trip.site, trip.demand)
        if p == 0:
            rep.add("Coverage", key, f"demand {trip.demand} out of range of site {trip.site} (type {trip.drone_type})")
            p = trip.return_slot - trip.depart_slot + 1
        elif trip.return_slot - trip.depart_slot + 1 != p:
            rep.add("Coverage", key, f"trip spans {trip.return_slot - trip.depart_slot + 1} slots, roundtrip is {p}")

        if trip.period not in range(1, grid.periods + 1) or trip.depart_slot < 1 or trip.return_slot > grid.total_slots:
            rep.add("Horizon", key, f"trip [{trip.depart_slot}, {trip.return_slot}] outside horizon 1..{grid.total_slots}")
            continue
        if grid.period_of(trip.return_slot) != trip.period:
            rep.add("Horizon", key, f"return slot {trip.return_slot} is not in period {trip.period}")
            continue

        if trip.period <= len(schedule.selected) and (trip.site, trip.drone_type) not in schedule.selected[trip.period - 1]:
            rep.add("Link", key, f"site {trip.site} (type {trip.drone_type}) not selected in period {trip.period}")

        start = grid.period_start(trip.period)
        if trip.return_slot < start + p + s:
            rep.add("FirstFlight", key, f"return {trip.return_slot} earlier than {start + p + s} allows")

        lanes[(trip.site, trip.drone_type, trip.period)].append((trip.return_slot, p, trip.demand))

    for k in range(instance.n):
        if served[k] != 1:
            rep.add("Assign", (k,), f"demand {k} served {served[k]} times")
    for k in served:
        if not 0 <= k < instance.n:
            rep.add("Assign", (k,), f"unknown demand {k}")

    for (i, tau, d), trips in sorted(lanes.items()):
        trips.sort()
        for (t1, _, k1), (t2, p2, k2) in zip(trips, trips[1:]):
            # the later trip departs at t2 - p2 + 1 and needs s idle slots before it
            if t1 > t2 - p2 - s:
                rep.add("Capacity", (i, tau, k1, k2), f"site {i}: returns {t1} and {t2} too close (p={p2}, s={s})")
    return rep


def recompute_objective(instance: Instance, schedule: Schedule, config: Optional[TwoPeriodConfig] = None) -> float:
    report = validate(instance, schedule, config)
    if not report.ok:
        raise InvalidScheduleError("; ".join(v.detail for v in report.violations[:5]))
    total = 0.0
    for t in schedule.trips:
        p = instance.p_ik(t.drone_type, t.site, t.demand)
        total += eval_disutility(instance.demands[t.demand], t.return_slot - p / 2, instance.grid, config)
    return total


def makespan_fraction(schedule: Schedule, grid: TimeGrid) -> float:
    """Last return slot as a fraction of the horizon."""
    if not schedule.trips:
        raise ValueError("makespan of an empty schedule is undefined")
    return max(t.return_slot for t in schedule.trips) / grid.total_slots


def makespan_gap(makespan_fine: int, slots_fine: int, makespan_coarse: int, slots_coarse: int) -> float:
    """Difference of horizon fractions between a fine and a coarse slot grid."""
    return makespan_fine / slots_fine - makespan_coarse / slots_coarse


def marginal_benefit(series: Sequence[Tuple[int, float]], p_min: Optional[int] = None) -> List[float]:
    """Percent disutility drop per added platform, relative to the smallest feasible fleet.

    ``series`` is ``[(p, disutility), ...]`` in increasing ``p`` starting at
    ``p_min``; one value is returned for every entry after the first.
    """
    if not series:
        return []
    ps = [p for p, _ in series]
    if any(b <= a for a, b in zip(ps, ps[1:])):
        raise ValueError("series must be strictly increasing in p")
    if p_min is not None and ps[0] != p_min:
        raise ValueError(f"series starts at p={ps[0]}, expected p_min={p_min}")
    base = series[0][1]
    if base <= 0:
        raise ValueError("disutility at p_min must be positive")
    return [(prev - cur) / base * 100.0 for (_, prev), (_, cur) in zip(series, series[1:])]
