"""Domain types for drone location and scheduling, plus disutility evaluation.

Time is measured in slots. A trip that returns to its platform at the end of
slot ``t`` after a roundtrip of ``p`` slots reaches its demand point at
``t - p/2``; that (possibly half-integral) value is what disutility curves are
evaluated at.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Optional, Sequence, Tuple, Union

import numpy as np

# Normalisation constant of the parametric curves (in slots).
CURVE_SCALE = 100.0


class DomainError(ValueError):
    """Raised when a curve or time value falls outside its valid domain."""


class InstanceError(ValueError):
    """Raised when an instance violates a structural invariant."""


@dataclass(frozen=True)
class TimeGrid:
    slot_minutes: int = 15
    slots_per_period: int = 48
    periods: int = 1

    def __post_init__(self):
        if self.slot_minutes < 1:
            raise InstanceError("slot_minutes must be >= 1")
        if self.slots_per_period < 1:
            raise InstanceError("slots_per_period must be >= 1")
        if self.periods not in (1, 2):
            raise InstanceError("periods must be 1 or 2")

    @classmethod
    def from_hours(cls, hours: float = 12.0, slot_minutes: int = 15, periods: int = 1) -> "TimeGrid":
        return cls(slot_minutes, int(round(hours * 60 / slot_minutes)), periods)

    @property
    def total_slots(self) -> int:
        return self.periods * self.slots_per_period

    def period_start(self, period: int) -> int:
        """Number of slots elapsed before ``period`` begins (0 for day 1)."""
        return (period - 1) * self.slots_per_period

    def period_end(self, period: int) -> int:
        return period * self.slots_per_period

    def period_of(self, slot: int) -> int:
        return 1 if slot <= self.slots_per_period else 2


@dataclass(frozen=True)
class Site:
    id: int
    x: float
    y: float

    @property
    def position(self) -> Tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class DroneType:
    id: int
    range_km: float
    speed_kmh: float = 60.0
    unload_minutes: float = 0.0
    name: str = ""

    def __post_init__(self):
        if not self.range_km > 0:
            raise InstanceError("drone range_km must be positive")
        if not self.speed_kmh > 0:
            raise InstanceError("drone speed_kmh must be positive")
        if self.unload_minutes < 0:
            raise InstanceError("drone unload_minutes must be non-negative")


SHORT_RANGE = DroneType(0, 30.0, 60.0, 0.0, "short")
LONG_RANGE = DroneType(1, 50.0, 60.0, 0.0, "long")


def eval_perishability(A: float, t: float) -> float:
    """Quadratic perishability term ``A t^2 / 100^2``."""
    if A < 0:
        raise DomainError(f"perishability coefficient must be non-negative, got {A}")
    if t < 0:
        raise DomainError(f"time must be non-negative, got {t}")
    return A * t * t / (CURVE_SCALE * CURVE_SCALE)


def eval_due_penalty(B: float, d: float, t: float) -> float:
    """Quadratic lateness term, zero up to the due slot ``d``."""
    if B < 0:
        raise DomainError(f"importance coefficient must be non-negative, got {B}")
    if not 0 < d < CURVE_SCALE:
        raise DomainError(f"due slot must lie in (0, {CURVE_SCALE:g}), got {d}")
    if t < 0:
        raise DomainError(f"time must be non-negative, got {t}")
    if t <= d:
        return 0.0
    late = t - d
    return B * late * late / ((CURVE_SCALE - d) ** 2)


@dataclass(frozen=True)
class ParametricCurve:
    A: float
    B: float
    due_slot: int

    def __post_init__(self):
        if self.A < 0 or self.B < 0:
            raise DomainError("curve coefficients must be non-negative")
        if not 1 <= self.due_slot < CURVE_SCALE:
            raise DomainError(f"due slot must lie in [1, {CURVE_SCALE:g}), got {self.due_slot}")

    def __call__(self, t: float) -> float:
        return eval_perishability(self.A, t) + eval_due_penalty(self.B, self.due_slot, t)

    def many(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        late = np.maximum(t - self.due_slot, 0.0)
        return self.A * t * t / (CURVE_SCALE * CURVE_SCALE) + self.B * late * late / (
            (CURVE_SCALE - self.due_slot) ** 2
        )


@dataclass(frozen=True)
class TabularCurve:
    """Disutility given by a table over slots 0, 1, 2, ... with linear interpolation.

    ``due_slot`` only matters for the overnight penalty of two-period runs; a
    table without one is treated as due on day 1.
    """

    values: Tuple[float, ...]
    due_slot: Optional[int] = None

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if len(vals) < 2:
            raise DomainError("tabular curve needs at least two entries")
        for j, v in enumerate(vals):
            if v < 0:
                raise DomainError(f"tabular curve entry {j} is negative")
            if j and v < vals[j - 1]:
                raise DomainError(f"tabular curve decreases at entry {j} ({vals[j - 1]} -> {v})")

    @property
    def horizon(self) -> int:
        return len(self.values) - 1

    def __call__(self, t: float) -> float:
        if t < 0 or t > self.horizon:
            raise DomainError(f"time {t} outside tabulated range [0, {self.horizon}]")
        lo = int(math.floor(t))
        if lo == t:
            return self.values[lo]
        frac = t - lo
        return self.values[lo] + frac * (self.values[lo + 1] - self.values[lo])

    def many(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if t.size and (t.min() < 0 or t.max() > self.horizon):
            raise DomainError("time outside tabulated range")
        return np.interp(t, np.arange(len(self.values), dtype=float), np.asarray(self.values))


DisutilityCurve = Union[ParametricCurve, TabularCurve]


@dataclass(frozen=True)
class Demand:
    id: int
    x: float
    y: float
    curve: DisutilityCurve

    @property
    def position(self) -> Tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class TwoPeriodConfig:
    relocation_budget: int
    penalty_due_day1: float = 100.0
    penalty_due_day2: float = 50.0

    def __post_init__(self):
        if self.relocation_budget < 0:
            raise InstanceError("relocation budget must be non-negative")
        if self.penalty_due_day1 < 0 or self.penalty_due_day2 < 0:
            raise InstanceError("overnight penalties must be non-negative")


def overnight_penalty(curve: DisutilityCurve, grid: TimeGrid, cfg: TwoPeriodConfig) -> float:
    """Fixed penalty added to every second-day delivery of a demand."""
    due = curve.due_slot
    if due is not None and due > grid.slots_per_period:
        return cfg.penalty_due_day2
    return cfg.penalty_due_day1


def eval_disutility(
    demand: Demand,
    t: float,
    grid: Optional[TimeGrid] = None,
    two_period: Optional[TwoPeriodConfig] = None,
) -> float:
    """Disutility of delivering ``demand`` at (fractional) slot time ``t``."""
    if t < 0:
        raise DomainError(f"time must be non-negative, got {t}")
    if grid is not None and t > grid.total_slots:
        raise DomainError(f"time {t} beyond horizon of {grid.total_slots} slots")
    value = demand.curve(t)
    if two_period is not None:
        if grid is None:
            raise ValueError("two-period evaluation needs the time grid")
        if t > grid.slots_per_period:
            value += overnight_penalty(demand.curve, grid, two_period)
    return value


def delivery_time(return_slot: int, roundtrip: int) -> float:
    """Moment the package reaches the demand for a trip returning at ``return_slot``."""
    return return_slot - roundtrip / 2


@dataclass(frozen=True)
class FleetSpec:
    drone_types: Tuple[DroneType, ...]
    counts: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "drone_types", tuple(self.drone_types))
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        if len(self.drone_types) != len(self.counts):
            raise InstanceError("one count per drone type is required")
        if not self.drone_types:
            raise InstanceError("fleet needs at least one drone type")
        for j, dt in enumerate(self.drone_types):
            if dt.id != j:
                raise InstanceError(f"drone type ids must be contiguous from 0 (got {dt.id} at {j})")
        if any(c < 0 for c in self.counts):
            raise InstanceError("drone counts must be non-negative")
        if self.total < 1:
            raise InstanceError("fleet must contain at least one drone")

    @property
    def total(self) -> int:
        return sum(self.counts)

    @property
    def active_types(self) -> Tuple[int, ...]:
        return tuple(j for j, c in enumerate(self.counts) if c > 0)

    @classmethod
    def homogeneous(cls, drone: DroneType, p: int) -> "FleetSpec":
        return cls((replace(drone, id=0),), (p,))


def mixed_fleet_split(p: int) -> Tuple[int, int]:
    """Short/long-range counts for a fleet of ``p`` drones split in half."""
    short = p // 2
    return short, p - short


Matrix = Tuple[Tuple[int, ...], ...]


@dataclass(frozen=True)
class Instance:
    """A DLS instance.

    ``roundtrip[tau][i][k]`` is the roundtrip time in slots of a drone of type
    ``tau`` from site ``i`` to demand ``k``; 0 marks an out-of-range pair.
    ``site_origin[i]`` names the site that ``i`` was duplicated from.
    """

    sites: Tuple[Site, ...]
    demands: Tuple[Demand, ...]
    grid: TimeGrid
    fleet: FleetSpec
    roundtrip: Tuple[Matrix, ...]
    setup_slots: int = 1
    site_origin: Tuple[int, ...] = field(default=())
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "sites", tuple(self.sites))
        object.__setattr__(self, "demands", tuple(self.demands))
        rt = tuple(tuple(tuple(int(v) for v in row) for row in mat) for mat in self.roundtrip)
        object.__setattr__(self, "roundtrip", rt)
        if not self.site_origin:
            object.__setattr__(self, "site_origin", tuple(range(len(self.sites))))
        else:
            object.__setattr__(self, "site_origin", tuple(int(o) for o in self.site_origin))
        self._check()

    def _check(self):
        for j, s in enumerate(self.sites):
            if s.id != j:
                raise InstanceError(f"site ids must be contiguous from 0 (got {s.id} at {j})")
        for j, d in enumerate(self.demands):
            if d.id != j:
                raise InstanceError(f"demand ids must be contiguous from 0 (got {d.id} at {j})")
        if self.setup_slots < 0:
            raise InstanceError("setup_slots must be non-negative")
        if not self.sites:
            raise InstanceError("instance needs at least one site")
        if self.fleet.total > self.m:
            raise InstanceError(f"fleet of {self.fleet.total} drones exceeds {self.m} sites")
        if len(self.site_origin) != self.m:
            raise InstanceError("site_origin must have one entry per site")
        if len(self.roundtrip) != len(self.fleet.drone_types):
            raise InstanceError("one roundtrip matrix per drone type is required")
        for tau, mat in enumerate(self.roundtrip):
            if len(mat) != self.m or any(len(row) != self.n for row in mat):
                raise InstanceError(f"roundtrip matrix of type {tau} must be {self.m} x {self.n}")
            if any(v < 0 for row in mat for v in row):
                raise InstanceError(f"roundtrip matrix of type {tau} has negative entries")
        types = self.fleet.drone_types
        for a in types:
            for b in types:
                if b.range_km >= a.range_km and a.id != b.id:
                    for i in range(self.m):
                        for k in range(self.n):
                            if self.roundtrip[a.id][i][k] and not self.roundtrip[b.id][i][k]:
                                raise InstanceError(
                                    f"coverage not monotone in range: type {b.id} misses ({i},{k})"
                                )

    @property
    def m(self) -> int:
        return len(self.sites)

    @property
    def n(self) -> int:
        return len(self.demands)

    @property
    def p(self) -> int:
        return self.fleet.total

    def p_ik(self, tau: int, i: int, k: int) -> int:
        return self.roundtrip[tau][i][k]

    def covers(self, tau: int, i: int, k: int) -> bool:
        return self.roundtrip[tau][i][k] > 0

    def coverage(self, tau: int, i: int) -> Tuple[int, ...]:
        return tuple(k for k, v in enumerate(self.roundtrip[tau][i]) if v > 0)

    @cached_property
    def uncovered_demands(self) -> Tuple[int, ...]:
        """Demands that no (site, active drone type) pair can reach."""
        active = self.fleet.active_types
        return tuple(
            k
            for k in range(self.n)
            if not any(self.roundtrip[t][i][k] for t in active for i in range(self.m))
        )

    @property
    def uncoverable(self) -> bool:
        return bool(self.uncovered_demands)

    def roundtrip_array(self, tau: int) -> np.ndarray:
        return np.asarray(self.roundtrip[tau], dtype=np.int64).reshape(self.m, self.n)

    def with_fleet(self, counts: Sequence[int]) -> "Instance":
        return replace(self, fleet=FleetSpec(self.fleet.drone_types, tuple(counts)))

    def with_grid(self, grid: TimeGrid) -> "Instance":
        return replace(self, grid=grid)

    def with_setup(self, setup_slots: int) -> "Instance":
        return replace(self, setup_slots=setup_slots)

    def disutility(self, k: int, t: float, two_period: Optional[TwoPeriodConfig] = None) -> float:
        return eval_disutility(self.demands[k], t, self.grid, two_period)
