"""Solution-side types shared by the solvers, the verifier and the CLI."""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from .core import Instance, TwoPeriodConfig, delivery_time, eval_disutility

Unit = Tuple[int, int]  # (site, drone type)


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    UNKNOWN = "Unknown"


@dataclass(frozen=True, order=True)
class Trip:
    period: int
    site: int
    return_slot: int
    demand: int
    drone_type: int
    depart_slot: int

    @classmethod
    def make(cls, site: int, demand: int, return_slot: int, roundtrip: int, drone_type: int = 0, period: int = 1) -> "Trip":
        return cls(period, site, return_slot, demand, drone_type, return_slot - roundtrip + 1)


@dataclass(frozen=True)
class Schedule:
    """Selected (site, type) pairs per period, the trips flown, and overnight moves."""

    selected: Tuple[Tuple[Unit, ...], ...]
    trips: Tuple[Trip, ...]
    relocations: Tuple[Tuple[int, int], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "selected", tuple(tuple(sorted(map(tuple, s))) for s in self.selected))
        object.__setattr__(self, "trips", tuple(sorted(self.trips)))
        object.__setattr__(self, "relocations", tuple(tuple(r) for r in self.relocations))

    def selected_sites(self, period: int = 1) -> Tuple[int, ...]:
        return tuple(sorted({i for i, _ in self.selected[period - 1]}))

    def served_in(self, period: int) -> int:
        return sum(1 for t in self.trips if t.period == period)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "selected": [[list(u) for u in s] for s in self.selected],
            "trips": [
                {
                    "period": t.period,
                    "drone_type": t.drone_type,
                    "site": t.site,
                    "demand": t.demand,
                    "depart_slot": t.depart_slot,
                    "return_slot": t.return_slot,
                }
                for t in self.trips
            ],
            "relocations": [list(r) for r in self.relocations],
        }

    @classmethod
    def from_dict(cls, doc: Dict[str, Any]) -> "Schedule":
        trips = [
            Trip(t["period"], t["site"], t["return_slot"], t["demand"], t["drone_type"], t["depart_slot"])
            for t in doc["trips"]
        ]
        return cls(
            tuple(tuple(tuple(u) for u in s) for s in doc["selected"]),
            tuple(trips),
            tuple(tuple(r) for r in doc.get("relocations", [])),
        )


@dataclass
class SearchStats:
    nodes: int = 0
    elapsed: float = 0.0
    incumbent_updates: int = 0


@dataclass
class SolveResult:
    status: Status
    objective: Optional[float] = None
    lower_bound: Optional[float] = None
    schedule: Optional[Schedule] = None
    stats: SearchStats = field(default_factory=SearchStats)
    message: str = ""
    uncovered: Tuple[int, ...] = ()

    @property
    def gap(self) -> Optional[float]:
        if self.objective is None or self.lower_bound is None:
            return None
        if self.objective == 0:
            return 0.0
        return (self.objective - self.lower_bound) / abs(self.objective)


def trip_terms(instance: Instance, schedule: Schedule, config: Optional[TwoPeriodConfig] = None) -> List[Dict[str, Any]]:
    rows = []
    for t in schedule.trips:
        p = instance.p_ik(t.drone_type, t.site, t.demand)
        when = delivery_time(t.return_slot, p)
        rows.append(
            {
                "period": t.period,
                "drone_type": t.drone_type,
                "site": t.site,
                "demand": t.demand,
                "depart_slot": t.depart_slot,
                "return_slot": t.return_slot,
                "delivery_time": when,
                "disutility": eval_disutility(instance.demands[t.demand], when, instance.grid, config),
            }
        )
    return rows


def result_to_dict(
    result: SolveResult,
    instance: Instance,
    config: Optional[TwoPeriodConfig] = None,
    with_timing: bool = True,
    meta: Optional[Dict[str, Any]] = None,
) -> Dict[str, Any]:
    doc: Dict[str, Any] = {
        "status": result.status.value,
        "objective": result.objective,
        "lower_bound": result.lower_bound,
        "gap": result.gap,
    }
    if result.schedule is not None:
        s = result.schedule
        doc["selected_sites"] = [[list(u) for u in sel] for sel in s.selected]
        doc["trips"] = trip_terms(instance, s, config)
        doc["relocations"] = [list(r) for r in s.relocations]
    else:
        doc["selected_sites"] = []
        doc["trips"] = []
        doc["relocations"] = []
    if result.uncovered:
        doc["uncovered_demands"] = list(result.uncovered)
    if result.message:
        doc["message"] = result.message
    doc["stats"] = {
        "nodes": result.stats.nodes,
        "incumbent_updates": result.stats.incumbent_updates,
        "elapsed": result.stats.elapsed if with_timing else None,
    }
    if config is not None:
        doc["two_period"] = {
            "relocation_budget": config.relocation_budget,
            "penalty_due_day1": config.penalty_due_day1,
            "penalty_due_day2": config.penalty_due_day2,
        }
    if meta:
        doc["meta"] = meta
    return doc


def write_solution(path: Union[str, Path], doc: Dict[str, Any]) -> Path:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
    tmp.replace(path)
    return path


def read_solution(path: Union[str, Path]) -> Tuple[Dict[str, Any], Optional[Schedule]]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if not doc.get("trips") and not doc.get("selected_sites"):
        return doc, None
    sched = Schedule.from_dict(
        {"selected": doc["selected_sites"], "trips": doc["trips"], "relocations": doc.get("relocations", [])}
    )
    return doc, sched
