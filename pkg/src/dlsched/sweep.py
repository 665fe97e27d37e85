"""Parameter sweeps producing one CSV per table family plus a solution file per run."""
from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Tuple

from .core import FleetSpec, Instance, InstanceError, TimeGrid, TwoPeriodConfig, mixed_fleet_split
from .instances import ScenarioParams, duplicate_sites, fleet_for, generate_scenario, make_instance, read_instance
from .schedule import SolveResult, Status, result_to_dict, write_solution
from .solve import attach_relocations, solve_exact, solve_heuristic
from .verify import makespan_fraction, marginal_benefit, validate

COLUMNS = (
    "p",
    "Q",
    "variant",
    "status",
    "disutility",
    "lower_bound",
    "gap",
    "cpu_seconds",
    "served_day1",
    "served_day2",
    "makespan_fraction",
    "marginal_benefit_pct",
)
ENGINES = ("exact", "heuristic")
FLEETS = ("short", "long", "mixed", "as-is")


@dataclass(frozen=True)
class SweepConfig:
    """What to sweep. ``fleets`` entry ``as-is`` keeps a file instance's own drone types."""

    instance_path: Optional[str] = None
    scenario: Optional[ScenarioParams] = None
    p_values: Tuple[int, ...] = ()
    q_values: Tuple[int, ...] = ()
    fleets: Tuple[str, ...] = ("as-is",)
    slot_minutes: Tuple[int, ...] = ()
    copies: Tuple[int, ...] = (1,)
    engine: str = "exact"  # exact, heuristic or both
    time_limit: float = 60.0
    node_limit: Optional[int] = None
    restarts: int = 20
    seed: int = 0
    penalty_due_day1: float = 100.0
    penalty_due_day2: float = 50.0
    single_period: bool = True
    out_dir: str = "sweep-out"
    workers: int = 1
    timing: bool = True
    hardware_note: str = ""

    def __post_init__(self):
        for name in ("p_values", "q_values", "fleets", "slot_minutes", "copies"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if (self.instance_path is None) == (self.scenario is None):
            raise ValueError("give exactly one of instance_path or scenario")
        if not self.p_values:
            raise ValueError("the p axis must have at least one value")
        if not self.single_period and not self.q_values:
            raise ValueError("nothing to run: single-period table disabled and no Q values")
        if self.time_limit <= 0 or self.restarts < 0 or (self.node_limit is not None and self.node_limit <= 0):
            raise ValueError("budgets must be positive")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.engine not in ENGINES + ("both",):
            raise ValueError(f"unknown engine {self.engine!r}")
        for f in self.fleets:
            if f not in FLEETS:
                raise ValueError(f"unknown fleet choice {f!r}")
        if self.scenario is not None and "as-is" in self.fleets:
            object.__setattr__(self, "fleets", tuple(self.scenario.fleet if f == "as-is" else f for f in self.fleets))
        if any(q < 0 for q in self.q_values) or any(p < 1 for p in self.p_values) or any(c < 1 for c in self.copies):
            raise ValueError("p >= 1, Q >= 0 and copies >= 1 are required")

    @property
    def engines(self) -> Tuple[str, ...]:
        return ENGINES if self.engine == "both" else (self.engine,)


@dataclass(frozen=True)
class Run:
    table: str  # "single_period" or "two_period"
    p: int
    Q: Optional[int]
    fleet: str
    slot_minutes: Optional[int]
    copies: int
    engine: str

    @property
    def variant(self) -> str:
        slot = f"-w{self.slot_minutes}" if self.slot_minutes else ""
        return f"{self.fleet}{slot}-x{self.copies}-{self.engine}"

    @property
    def stem(self) -> str:
        q = f"_Q{self.Q}" if self.Q is not None else ""
        return f"{self.table}_{self.variant}_p{self.p}{q}"


def plan(cfg: SweepConfig) -> Dict[str, List[Run]]:
    slots = cfg.slot_minutes or (None,)
    tables: Dict[str, List[Run]] = {}
    if cfg.single_period:
        tables["single_period"] = [
            Run("single_period", p, None, f, w, c, e)
            for f in cfg.fleets
            for w in slots
            for c in cfg.copies
            for e in cfg.engines
            for p in sorted(cfg.p_values)
        ]
    if cfg.q_values:
        tables["two_period"] = [
            Run("two_period", p, q, f, w, c, e)
            for f in cfg.fleets
            for w in slots
            for c in cfg.copies
            for e in cfg.engines
            for p in sorted(cfg.p_values)
            for q in sorted(cfg.q_values)
        ]
    return tables


def _counts(fleet: FleetSpec, choice: str, p: int) -> Tuple[int, ...]:
    if choice != "as-is":
        return fleet_for(choice, p, fleet.drone_types).counts
    active = fleet.active_types
    counts = [0] * len(fleet.drone_types)
    if len(active) == 1:
        counts[active[0]] = p
    else:
        counts[active[0]], counts[active[1]] = mixed_fleet_split(p)
    return tuple(counts)


def build_instance(cfg: SweepConfig, run: Run) -> Instance:
    """The instance for one run; raises InstanceError if ``p`` exceeds the site count."""
    periods = 2 if run.table == "two_period" else 1
    if cfg.scenario is not None:
        params = replace(cfg.scenario, p=1, fleet=run.fleet, periods=periods)
        if run.slot_minutes:
            params = replace(params, slot_minutes=run.slot_minutes)
        base = generate_scenario(params)
    else:
        base = read_instance(cfg.instance_path)
        hours = base.grid.slots_per_period * base.grid.slot_minutes / 60
        if run.slot_minutes:
            grid = TimeGrid.from_hours(hours, run.slot_minutes, periods)
        else:
            grid = replace(base.grid, periods=periods)
        if run.slot_minutes or run.fleet != "as-is":
            # roundtrips are re-derived from geometry for the new slot width or drone types
            one = FleetSpec(base.fleet.drone_types, _counts(base.fleet, run.fleet, 1))
            base = make_instance(base.sites, base.demands, one, grid, base.setup_slots, name=base.name)
        else:
            base = base.with_grid(grid)
    inst = duplicate_sites(base, run.copies)
    return inst.with_fleet(_counts(inst.fleet, run.fleet, run.p))


def _fmt(x: Any) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        if math.isinf(x) or math.isnan(x):
            return ""
        return repr(x)
    return str(x)


def execute(cfg: SweepConfig, run: Run) -> Dict[str, Any]:
    """Solve one run, write its solution file, and return its CSV row (without marginal benefit)."""
    out = Path(cfg.out_dir) / "solutions"
    out.mkdir(parents=True, exist_ok=True)
    two = TwoPeriodConfig(run.Q, cfg.penalty_due_day1, cfg.penalty_due_day2) if run.table == "two_period" else None
    meta = {"seed": cfg.seed, "engine": run.engine, "variant": run.variant, "p": run.p, "Q": run.Q}
    cpu0 = time.process_time()
    try:
        inst = build_instance(cfg, run)
    except InstanceError as exc:
        inst = None
        result = SolveResult(Status.INFEASIBLE, message=str(exc))
    if inst is not None:
        meta["instance"] = inst.name
        if run.engine == "exact":
            result = solve_exact(
                inst, two, time_limit=cfg.time_limit, node_limit=cfg.node_limit, warm_restarts=cfg.restarts, seed=cfg.seed
            )
        else:
            try:
                result = solve_heuristic(inst, two, restarts=cfg.restarts, seed=cfg.seed, time_limit=cfg.time_limit)
            except NotImplementedError as exc:
                result = SolveResult(Status.UNKNOWN, message=str(exc))
        if result.schedule is not None:
            report = validate(inst, result.schedule, two)
            if not report.ok:
                raise RuntimeError(f"run {run.stem} produced an invalid schedule: {report.to_dict()}")
            if two is not None:
                sched, _ = attach_relocations(inst, result.schedule)
                result = replace(result, schedule=sched)
    cpu = time.process_time() - cpu0
    if cfg.timing:
        meta["cpu_seconds"] = cpu
    if inst is not None:
        doc = result_to_dict(result, inst, two, with_timing=cfg.timing, meta=meta)
    else:
        doc = {"status": result.status.value, "message": result.message, "meta": meta}
    write_solution(out / f"{run.stem}.json", doc)

    sched = result.schedule
    row = {
        "p": run.p,
        "Q": run.Q,
        "variant": run.variant,
        "status": result.status.value,
        "disutility": result.objective,
        "lower_bound": result.lower_bound,
        "gap": result.gap,
        "cpu_seconds": cpu if cfg.timing else None,
        "served_day1": sched.served_in(1) if sched is not None else None,
        "served_day2": sched.served_in(2) if sched is not None and two is not None else None,
        "makespan_fraction": makespan_fraction(sched, inst.grid) if sched is not None and sched.trips else None,
        "marginal_benefit_pct": None,
    }
    return row


def _execute_star(args):
    return execute(*args)


def fill_marginal_benefit(rows: List[Dict[str, Any]]) -> None:
    """Marginal benefit per (variant, Q) group, relative to the smallest feasible p."""
    groups: Dict[Tuple[str, Optional[int]], List[Dict[str, Any]]] = {}
    for r in rows:
        groups.setdefault((r["variant"], r["Q"]), []).append(r)
    for group in groups.values():
        feasible = sorted((r for r in group if r["disutility"] is not None), key=lambda r: r["p"])
        if not feasible:
            continue
        run = [feasible[0]]
        for r in feasible[1:]:
            if r["p"] != run[-1]["p"] + 1:
                break
            run.append(r)
        series = [(r["p"], r["disutility"]) for r in run]
        if series[0][1] <= 0:
            continue
        for r, mb in zip(run[1:], marginal_benefit(series)):
            r["marginal_benefit_pct"] = mb


def _write_csv(path: Path, rows: List[Dict[str, Any]], note: str) -> None:
    buf = io.StringIO()
    if note:
        buf.write(f"# hardware: {note}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in COLUMNS])
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(buf.getvalue(), encoding="utf-8")
    tmp.replace(path)


def _results(cfg: SweepConfig, runs: List[Run]) -> Iterator[Dict[str, Any]]:
    if cfg.workers == 1:
        for run in runs:
            yield execute(cfg, run)
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            yield from pool.map(_execute_star, [(cfg, r) for r in runs])


def run_sweep(cfg: SweepConfig) -> Dict[str, Path]:
    """Run every table; CSVs are rewritten after each run so a crash keeps finished rows."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    for table, runs in plan(cfg).items():
        path = out / f"{table}.csv"
        rows: List[Dict[str, Any]] = []
        _write_csv(path, rows, cfg.hardware_note)
        for row in _results(cfg, runs):
            rows.append(row)
            _write_csv(path, rows, cfg.hardware_note)
        fill_marginal_benefit(rows)
        _write_csv(path, rows, cfg.hardware_note)
        paths[table] = path
    return paths


def config_to_dict(cfg: SweepConfig) -> Dict[str, Any]:
    doc = asdict(cfg)
    return doc
