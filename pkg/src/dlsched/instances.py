"""Instance construction: geometry, synthetic scenarios, transformations and file I/O."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .core import (
    LONG_RANGE,
    SHORT_RANGE,
    Demand,
    DisutilityCurve,
    DomainError,
    DroneType,
    FleetSpec,
    Instance,
    InstanceError,
    ParametricCurve,
    Site,
    TabularCurve,
    TimeGrid,
    mixed_fleet_split,
)

FORMAT_VERSION = 1

_EPS = 1e-9


class OutOfCoverageError(ValueError):
    pass


class InstanceFormatError(ValueError):
    """Problem reading an instance file; ``where`` names the offending field."""

    def __init__(self, message: str, where: str = "", line: Optional[int] = None):
        self.where = where
        self.line = line
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if where:
            prefix += f"{where}: "
        super().__init__(prefix + message)


def roundtrip_slots(distance_km: float, drone: DroneType, slot_minutes: int) -> int:
    """Slots needed to fly to a point ``distance_km`` away, unload, and come back."""
    if distance_km < 0:
        raise ValueError("distance must be non-negative")
    if distance_km > drone.range_km + _EPS:
        raise OutOfCoverageError(
            f"{distance_km:.3f} km is beyond the {drone.range_km:g} km range of drone type {drone.id}"
        )
    minutes = 2.0 * distance_km / drone.speed_kmh * 60.0 + drone.unload_minutes
    return max(1, math.ceil(minutes / slot_minutes - _EPS))


def distance(a: Tuple[float, float], b: Tuple[float, float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def coverage_sets(
    sites: Sequence[Site], demands: Sequence[Demand], drone_types: Sequence[DroneType]
) -> List[List[Tuple[int, ...]]]:
    """``result[tau][i]`` is the tuple of demands within range of site ``i`` for type ``tau``."""
    out = []
    for dt in drone_types:
        per_site = []
        for s in sites:
            per_site.append(
                tuple(d.id for d in demands if distance(s.position, d.position) <= dt.range_km + _EPS)
            )
        out.append(per_site)
    return out


def roundtrip_matrices(
    sites: Sequence[Site], demands: Sequence[Demand], drone_types: Sequence[DroneType], slot_minutes: int
) -> Tuple[Tuple[Tuple[int, ...], ...], ...]:
    mats = []
    cover = coverage_sets(sites, demands, drone_types)
    for dt, per_site in zip(drone_types, cover):
        mat = []
        for s, covered in zip(sites, per_site):
            row = [0] * len(demands)
            for k in covered:
                row[k] = roundtrip_slots(distance(s.position, demands[k].position), dt, slot_minutes)
            mat.append(tuple(row))
        mats.append(tuple(mat))
    return tuple(mats)


def make_instance(
    sites: Sequence[Site],
    demands: Sequence[Demand],
    fleet: FleetSpec,
    grid: TimeGrid = TimeGrid(),
    setup_slots: int = 1,
    roundtrip=None,
    site_origin: Sequence[int] = (),
    name: str = "",
) -> Instance:
    """Build an instance, deriving roundtrip times from geometry when not given."""
    if roundtrip is None:
        roundtrip = roundtrip_matrices(sites, demands, fleet.drone_types, grid.slot_minutes)
    return Instance(
        sites=tuple(sites),
        demands=tuple(demands),
        grid=grid,
        fleet=fleet,
        roundtrip=roundtrip,
        setup_slots=setup_slots,
        site_origin=tuple(site_origin),
        name=name,
    )


def fleet_for(choice: str, p: int, drone_types: Sequence[DroneType] = (SHORT_RANGE, LONG_RANGE)) -> FleetSpec:
    """Fleet over the standard (short, long) type pair: ``short``, ``long`` or ``mixed``."""
    if choice == "short":
        counts = (p, 0)
    elif choice == "long":
        counts = (0, p)
    elif choice == "mixed":
        counts = mixed_fleet_split(p)
    else:
        raise ValueError(f"unknown fleet choice {choice!r}")
    return FleetSpec(tuple(drone_types), counts)


# -- synthetic scenarios ----------------------------------------------------

STREAM_SITES, STREAM_DEMANDS, STREAM_COEFFS = 0, 1, 2


def _stream(seed: int, key: int) -> np.random.Generator:
    # PCG64 keyed by (seed, entity class): adding draws to one class never shifts another.
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(key,))))


@dataclass(frozen=True)
class ScenarioParams:
    n_demands: int = 100
    n_sites: int = 25
    region: Tuple[float, float, float, float] = (0.0, 0.0, 120.0, 120.0)
    road_spacing_km: float = 30.0
    A_range: Tuple[float, float] = (50.0, 1000.0)
    B_range: Tuple[float, float] = (50.0, 1000.0)
    due_range_slots: Tuple[int, int] = (8, 32)
    seed: int = 0
    slot_minutes: int = 15
    horizon_hours: float = 12.0
    periods: int = 1
    uniform_mode: bool = False
    p: int = 15
    fleet: str = "long"
    setup_slots: int = 1

    def __post_init__(self):
        if self.n_demands < 1 or self.n_sites < 1:
            raise ValueError("need at least one demand and one site")
        x0, y0, x1, y1 = self.region
        if not (x1 > x0 and y1 > y0):
            raise ValueError("region must have positive extent")
        for name in ("A_range", "B_range", "due_range_slots"):
            lo, hi = getattr(self, name)
            if hi < lo:
                raise ValueError(f"{name} is empty")
        if self.road_spacing_km <= 0:
            raise ValueError("road_spacing_km must be positive")


def _road_points(rng: np.random.Generator, n: int, region, spacing: float) -> List[Tuple[float, float]]:
    x0, y0, x1, y1 = region
    xs = np.arange(x0, x1 + _EPS, spacing)
    ys = np.arange(y0, y1 + _EPS, spacing)
    pts = []
    for _ in range(n):
        if rng.random() < 0.5:
            # north-south road at a fixed x
            x = float(xs[rng.integers(len(xs))])
            y = float(rng.uniform(y0, y1))
        else:
            y = float(ys[rng.integers(len(ys))])
            x = float(rng.uniform(x0, x1))
        pts.append((round(x, 6), round(y, 6)))
    return pts


def generate_scenario(params: ScenarioParams) -> Instance:
    """Random scenario: sites along a road grid, demands scattered uniformly."""
    x0, y0, x1, y1 = params.region
    site_rng = _stream(params.seed, STREAM_SITES)
    demand_rng = _stream(params.seed, STREAM_DEMANDS)
    coeff_rng = _stream(params.seed, STREAM_COEFFS)

    sites = [Site(i, x, y) for i, (x, y) in enumerate(_road_points(site_rng, params.n_sites, params.region, params.road_spacing_km))]
    demands = []
    for k in range(params.n_demands):
        x = round(float(demand_rng.uniform(x0, x1)), 6)
        y = round(float(demand_rng.uniform(y0, y1)), 6)
        a = float(coeff_rng.uniform(*params.A_range))
        b = float(coeff_rng.uniform(*params.B_range))
        d = int(coeff_rng.integers(params.due_range_slots[0], params.due_range_slots[1] + 1))
        if params.uniform_mode:
            a, b, d = 100.0, 100.0, int(round(120 / params.slot_minutes))
        demands.append(Demand(k, x, y, ParametricCurve(a, b, d)))

    grid = TimeGrid.from_hours(params.horizon_hours, params.slot_minutes, params.periods)
    fleet = fleet_for(params.fleet, params.p)
    name = f"scenario-seed{params.seed}-n{params.n_demands}-m{params.n_sites}"
    return make_instance(sites, demands, fleet, grid, params.setup_slots, name=name)


def duplicate_sites(instance: Instance, copies: int) -> Instance:
    """Replicate every site ``copies`` times so each location can host several drones."""
    if copies < 1:
        raise ValueError("copies must be >= 1")
    if copies == 1:
        return instance
    sites, origin, rows_per_type = [], [], [[] for _ in instance.roundtrip]
    for s in instance.sites:
        for _ in range(copies):
            sites.append(Site(len(sites), s.x, s.y))
            origin.append(instance.site_origin[s.id])
            for tau, mat in enumerate(instance.roundtrip):
                rows_per_type[tau].append(mat[s.id])
    return replace(
        instance,
        sites=tuple(sites),
        site_origin=tuple(origin),
        roundtrip=tuple(tuple(rows) for rows in rows_per_type),
        name=f"{instance.name}-x{copies}" if instance.name else "",
    )


def tiny_instance(
    roundtrip: Sequence[Sequence[int]],
    curves: Sequence[DisutilityCurve],
    p: int,
    slots: int,
    setup_slots: int = 1,
    periods: int = 1,
    name: str = "",
) -> Instance:
    """Instance given directly by a site x demand roundtrip matrix (0 = not covered)."""
    m = len(roundtrip)
    sites = [Site(i, float(i), 0.0) for i in range(m)]
    demands = [Demand(k, float(k), 1.0, c) for k, c in enumerate(curves)]
    drone = DroneType(0, 1.0, 60.0, 0.0, "tiny")
    return Instance(
        sites=tuple(sites),
        demands=tuple(demands),
        grid=TimeGrid(15, slots, periods),
        fleet=FleetSpec((drone,), (p,)),
        roundtrip=(tuple(tuple(int(v) for v in row) for row in roundtrip),),
        setup_slots=setup_slots,
        name=name,
    )


def random_tiny_instance(
    seed: int,
    n_range: Tuple[int, int] = (2, 6),
    m_range: Tuple[int, int] = (2, 3),
    slot_range: Tuple[int, int] = (8, 16),
    periods: int = 1,
    cover_prob: float = 0.75,
    max_roundtrip: Optional[int] = None,
) -> Instance:
    """Seeded small instance for oracle comparisons; ranges are inclusive."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    m = int(rng.integers(m_range[0], m_range[1] + 1))
    T = int(rng.integers(slot_range[0], slot_range[1] + 1))
    p = int(rng.integers(1, m + 1))
    top = max_roundtrip or max(2, T // 3)
    rt = np.where(rng.random((m, n)) < cover_prob, rng.integers(1, top + 1, size=(m, n)), 0)
    curves = [
        ParametricCurve(
            float(rng.integers(50, 1001)),
            float(rng.integers(50, 1001)),
            int(rng.integers(1, T * periods + 1)),
        )
        for _ in range(n)
    ]
    return tiny_instance(rt.tolist(), curves, p, T, 1, periods, name=f"tiny-{seed}")


# -- hardness reduction -----------------------------------------------------


@dataclass(frozen=True)
class Job:
    processing_time: int
    weight: float


@dataclass(frozen=True)
class MachineSchedulingInstance:
    """Identical parallel machines, minimise total weighted completion time."""

    m_machines: int
    jobs: Tuple[Job, ...]
    threshold: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "jobs", tuple(self.jobs))
        if self.m_machines < 1:
            raise ValueError("need at least one machine")
        for j in self.jobs:
            if j.processing_time < 1:
                raise ValueError("processing times must be >= 1")
            if not j.weight > 0:
                raise ValueError("weights must be positive")


def reduce_machine_scheduling(msi: MachineSchedulingInstance) -> Tuple[Instance, float]:
    """Encode a Pm||sum w_k C_k instance as DLS with coincident sites and zero setup.

    Returns the instance and the disutility threshold equivalent to the
    scheduling threshold ``K``.
    """
    horizon = sum(j.processing_time for j in msi.jobs)
    m = msi.m_machines
    sites = [Site(i, 0.0, 0.0) for i in range(m)]
    demands = [
        Demand(k, 0.0, 0.0, TabularCurve(tuple(j.weight * t for t in range(horizon + 1))))
        for k, j in enumerate(msi.jobs)
    ]
    row = tuple(j.processing_time for j in msi.jobs)
    machine = DroneType(0, 1.0, 60.0, 0.0, "machine")
    inst = Instance(
        sites=tuple(sites),
        demands=tuple(demands),
        grid=TimeGrid(1, max(horizon, 1), 1),
        fleet=FleetSpec((machine,), (m,)),
        roundtrip=((row,) * m,),
        setup_slots=0,
        name="reduced-pm",
    )
    threshold = msi.threshold - sum(j.weight * j.processing_time for j in msi.jobs) / 2
    return inst, threshold


# -- file I/O ---------------------------------------------------------------


def curve_to_dict(curve: DisutilityCurve) -> Dict[str, Any]:
    if isinstance(curve, ParametricCurve):
        return {"kind": "parametric", "A": curve.A, "B": curve.B, "due_slot": curve.due_slot}
    out: Dict[str, Any] = {"kind": "tabular", "values": list(curve.values)}
    if curve.due_slot is not None:
        out["due_slot"] = curve.due_slot
    return out


def instance_to_dict(instance: Instance, include_roundtrip: bool = True) -> Dict[str, Any]:
    g = instance.grid
    doc: Dict[str, Any] = {
        "format_version": FORMAT_VERSION,
        "name": instance.name,
        "grid": {"slot_minutes": g.slot_minutes, "slots_per_period": g.slots_per_period, "periods": g.periods},
        "setup_slots": instance.setup_slots,
        "sites": [
            {"id": s.id, "x": s.x, "y": s.y, "origin": instance.site_origin[s.id]} for s in instance.sites
        ],
        "demands": [{"id": d.id, "x": d.x, "y": d.y, "curve": curve_to_dict(d.curve)} for d in instance.demands],
        "drone_types": [
            {
                "id": t.id,
                "name": t.name,
                "range_km": t.range_km,
                "speed_kmh": t.speed_kmh,
                "unload_minutes": t.unload_minutes,
            }
            for t in instance.fleet.drone_types
        ],
        "fleet_counts": list(instance.fleet.counts),
    }
    if include_roundtrip:
        doc["roundtrip"] = [[list(row) for row in mat] for mat in instance.roundtrip]
    return doc


def write_instance(instance: Instance, path: Union[str, Path], include_roundtrip: bool = True) -> Path:
    path = Path(path)
    text = json.dumps(instance_to_dict(instance, include_roundtrip), indent=1)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def _req(obj: Any, key: str, where: str, kind=None):
    if not isinstance(obj, dict):
        raise InstanceFormatError("expected an object", where)
    if key not in obj:
        raise InstanceFormatError(f"missing required field '{key}'", f"{where}.{key}" if where else key)
    val = obj[key]
    if kind is not None and not isinstance(val, kind) or isinstance(val, bool) and kind is not bool:
        raise InstanceFormatError(f"field '{key}' has wrong type {type(val).__name__}", f"{where}.{key}" if where else key)
    return val


_NUM = (int, float)


def _curve_from_dict(doc: Any, where: str) -> DisutilityCurve:
    kind = _req(doc, "kind", where, str)
    try:
        if kind == "parametric":
            return ParametricCurve(
                float(_req(doc, "A", where, _NUM)),
                float(_req(doc, "B", where, _NUM)),
                int(_req(doc, "due_slot", where, int)),
            )
        if kind == "tabular":
            values = _req(doc, "values", where, list)
            due = doc.get("due_slot")
            return TabularCurve(tuple(float(v) for v in values), None if due is None else int(due))
    except DomainError as exc:
        raise InstanceFormatError(f"invalid curve: {exc}", where) from exc
    raise InstanceFormatError(f"unknown curve kind {kind!r}", f"{where}.kind")


def instance_from_dict(doc: Any) -> Instance:
    version = _req(doc, "format_version", "", int)
    if version != FORMAT_VERSION:
        raise InstanceFormatError(f"unsupported format_version {version} (expected {FORMAT_VERSION})", "format_version")
    g = _req(doc, "grid", "", dict)
    grid = TimeGrid(
        int(_req(g, "slot_minutes", "grid", int)),
        int(_req(g, "slots_per_period", "grid", int)),
        int(_req(g, "periods", "grid", int)),
    )
    sites, origin = [], []
    for j, s in enumerate(_req(doc, "sites", "", list)):
        w = f"sites[{j}]"
        sites.append(Site(int(_req(s, "id", w, int)), float(_req(s, "x", w, _NUM)), float(_req(s, "y", w, _NUM))))
        origin.append(int(s.get("origin", j)))
    demands = []
    for j, d in enumerate(_req(doc, "demands", "", list)):
        w = f"demands[{j}]"
        demands.append(
            Demand(
                int(_req(d, "id", w, int)),
                float(_req(d, "x", w, _NUM)),
                float(_req(d, "y", w, _NUM)),
                _curve_from_dict(_req(d, "curve", w, dict), f"{w}.curve"),
            )
        )
    types = []
    for j, t in enumerate(_req(doc, "drone_types", "", list)):
        w = f"drone_types[{j}]"
        types.append(
            DroneType(
                int(_req(t, "id", w, int)),
                float(_req(t, "range_km", w, _NUM)),
                float(_req(t, "speed_kmh", w, _NUM)),
                float(t.get("unload_minutes", 0.0)),
                str(t.get("name", "")),
            )
        )
    counts = [int(c) for c in _req(doc, "fleet_counts", "", list)]
    setup = int(_req(doc, "setup_slots", "", int))
    roundtrip = doc.get("roundtrip")
    try:
        fleet = FleetSpec(tuple(types), tuple(counts))
        return make_instance(sites, demands, fleet, grid, setup, roundtrip, origin, str(doc.get("name", "")))
    except (InstanceError, DomainError) as exc:
        raise InstanceFormatError(str(exc)) from exc


def read_instance(path: Union[str, Path]) -> Instance:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(exc.msg, line=exc.lineno) from exc
    return instance_from_dict(doc)
