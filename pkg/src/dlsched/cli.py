"""Command-line entry point: ``dlsched <command> [options]``.

Exit codes: 0 optimal or feasible (or a passing validation), 1 invalid
schedule or runtime failure, 2 usage error, 3 infeasible, 4 unknown.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from .core import InstanceError, TwoPeriodConfig
from .geo import emit_plot_data, write_geojson
from .ilp import ModelBuildError, build_model, export_lp
from .instances import (
    InstanceFormatError,
    Job,
    MachineSchedulingInstance,
    ScenarioParams,
    duplicate_sites,
    fleet_for,
    generate_scenario,
    make_instance,
    read_instance,
    reduce_machine_scheduling,
    write_instance,
)
from .schedule import Status, read_solution, result_to_dict, write_solution
from .solve import TooLargeError, attach_relocations, brute_force, solve_exact, solve_heuristic
from .sweep import SweepConfig, run_sweep
from .verify import InvalidScheduleError, validate

EXIT_OK, EXIT_INVALID, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_UNKNOWN = 0, 1, 2, 3, 4
STATUS_EXIT = {
    Status.OPTIMAL: EXIT_OK,
    Status.FEASIBLE: EXIT_OK,
    Status.INFEASIBLE: EXIT_INFEASIBLE,
    Status.UNKNOWN: EXIT_UNKNOWN,
}


# -- argument groups --------------------------------------------------------


def _scenario_args(p: argparse.ArgumentParser) -> None:
    d = ScenarioParams()
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--n-demands", type=int, default=d.n_demands)
    p.add_argument("--n-sites", type=int, default=d.n_sites)
    p.add_argument("--region", type=float, nargs=4, default=list(d.region), metavar=("X0", "Y0", "X1", "Y1"))
    p.add_argument("--road-spacing-km", type=float, default=d.road_spacing_km)
    p.add_argument("--a-range", type=float, nargs=2, default=list(d.A_range))
    p.add_argument("--b-range", type=float, nargs=2, default=list(d.B_range))
    p.add_argument("--due-range-slots", type=int, nargs=2, default=list(d.due_range_slots))
    p.add_argument("--slot-minutes", type=int, default=d.slot_minutes)
    p.add_argument("--horizon-hours", type=float, default=d.horizon_hours)
    p.add_argument("--periods", type=int, choices=(1, 2), default=d.periods)
    p.add_argument("--uniform", action="store_true", help="A=B=100 and a two-hour due time for every demand")
    p.add_argument("--p", type=int, default=d.p, help="number of drones (platforms)")
    p.add_argument("--fleet", choices=("short", "long", "mixed"), default=d.fleet)
    p.add_argument("--setup-slots", type=int, default=d.setup_slots)


def _params(a: argparse.Namespace) -> ScenarioParams:
    return ScenarioParams(
        n_demands=a.n_demands,
        n_sites=a.n_sites,
        region=tuple(a.region),
        road_spacing_km=a.road_spacing_km,
        A_range=tuple(a.a_range),
        B_range=tuple(a.b_range),
        due_range_slots=tuple(a.due_range_slots),
        seed=a.seed,
        slot_minutes=a.slot_minutes,
        horizon_hours=a.horizon_hours,
        periods=a.periods,
        uniform_mode=a.uniform,
        p=a.p,
        fleet=a.fleet,
        setup_slots=a.setup_slots,
    )


def _variant_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--instance", required=True)
    p.add_argument("--p", type=int, default=None, help="override the number of drones")
    p.add_argument("--fleet", choices=("short", "long", "mixed"), default=None, help="re-derive the fleet")
    p.add_argument("--copies", type=int, default=1, help="duplicate every site this many times")


def _solver_args(p: argparse.ArgumentParser) -> None:
    _variant_args(p)
    p.add_argument("--out", required=True, help="solution file to write")
    p.add_argument("--engine", choices=("exact", "heuristic", "brute"), default="exact")
    p.add_argument("--time-limit", type=float, default=None, help="seconds")
    p.add_argument("--node-limit", type=int, default=None)
    p.add_argument("--restarts", type=int, default=20, help="heuristic restarts")
    p.add_argument("--seed", type=int, default=0, help="heuristic seed")
    p.add_argument("--no-timing", action="store_true", help="omit wall-clock fields for reproducible output")


def _two_period_args(p: argparse.ArgumentParser, required: bool) -> None:
    p.add_argument("--Q", type=int, required=required, default=None, help="relocation budget")
    p.add_argument("--penalty-day1", type=float, default=100.0)
    p.add_argument("--penalty-day2", type=float, default=50.0)


def _two_config(a: argparse.Namespace) -> Optional[TwoPeriodConfig]:
    if getattr(a, "Q", None) is None:
        return None
    return TwoPeriodConfig(a.Q, a.penalty_day1, a.penalty_day2)


def _load_variant(a: argparse.Namespace, periods: Optional[int] = None):
    inst = read_instance(a.instance)
    if periods is not None and inst.grid.periods != periods:
        inst = inst.with_grid(replace(inst.grid, periods=periods))
    if a.fleet is not None:
        p = a.p if a.p is not None else inst.p
        fleet = fleet_for(a.fleet, 1)
        inst = make_instance(inst.sites, inst.demands, fleet, inst.grid, inst.setup_slots, name=inst.name)
        inst = duplicate_sites(inst, a.copies)
        return inst.with_fleet(fleet_for(a.fleet, p).counts)
    inst = duplicate_sites(inst, a.copies)
    if a.p is not None:
        active = inst.fleet.active_types
        if len(active) != 1:
            raise InstanceError("--p on a mixed-fleet instance needs --fleet")
        counts = [0] * len(inst.fleet.counts)
        counts[active[0]] = a.p
        inst = inst.with_fleet(counts)
    return inst


# -- commands ---------------------------------------------------------------


def cmd_gen(a: argparse.Namespace) -> int:
    inst = generate_scenario(_params(a))
    if a.copies > 1:
        inst = duplicate_sites(inst, a.copies)
    write_instance(inst, a.out)
    print(json.dumps({"instance": str(a.out), "seed": a.seed, "sites": inst.m, "demands": inst.n}))
    return EXIT_OK


def _solve(a: argparse.Namespace, periods: Optional[int]) -> int:
    cfg = _two_config(a)
    inst = _load_variant(a, periods)
    if inst.grid.periods == 2 and cfg is None:
        raise InstanceError("two-period instance: use solve2 with --Q")
    if a.engine == "exact":
        result = solve_exact(
            inst, cfg, time_limit=a.time_limit, node_limit=a.node_limit, warm_restarts=a.restarts, seed=a.seed
        )
    elif a.engine == "heuristic":
        result = solve_heuristic(inst, cfg, restarts=a.restarts, seed=a.seed, time_limit=a.time_limit)
    else:
        result = brute_force(inst, cfg)
    if result.schedule is not None:
        report = validate(inst, result.schedule, cfg)
        if not report.ok:
            print(json.dumps(report.to_dict(), indent=1), file=sys.stderr)
            return EXIT_INVALID
        if cfg is not None:
            result = replace(result, schedule=attach_relocations(inst, result.schedule)[0])
    meta = {"seed": a.seed, "engine": a.engine, "instance": str(a.instance), "name": inst.name}
    doc = result_to_dict(result, inst, cfg, with_timing=not a.no_timing, meta=meta)
    write_solution(a.out, doc)
    summary = {"status": doc["status"], "objective": doc["objective"], "lower_bound": doc["lower_bound"]}
    if result.uncovered:
        summary["uncovered_demands"] = list(result.uncovered)
    print(json.dumps(summary))
    return STATUS_EXIT[result.status]


def cmd_solve(a: argparse.Namespace) -> int:
    return _solve(a, None)


def cmd_solve2(a: argparse.Namespace) -> int:
    return _solve(a, 2)


def _solution_periods(doc: Dict[str, Any]) -> Optional[int]:
    if "two_period" in doc or len(doc.get("selected_sites") or []) == 2:
        return 2
    return None


def cmd_validate(a: argparse.Namespace) -> int:
    doc, sched = read_solution(a.solution)
    inst = _load_variant(a, _solution_periods(doc))
    if sched is None:
        print(json.dumps({"ok": False, "violations": [], "detail": f"solution has status {doc.get('status')}"}))
        return EXIT_INVALID
    cfg = _two_config(a)
    if cfg is None and "two_period" in doc:
        tp = doc["two_period"]
        cfg = TwoPeriodConfig(tp["relocation_budget"], tp["penalty_due_day1"], tp["penalty_due_day2"])
    report = validate(inst, sched, cfg)
    print(json.dumps(report.to_dict(), indent=1))
    return EXIT_OK if report.ok else EXIT_INVALID


def cmd_export_lp(a: argparse.Namespace) -> int:
    inst = _load_variant(a)
    cfg = _two_config(a)
    model = build_model(inst, cfg)
    export_lp(model, a.out)
    print(json.dumps(model.summary()))
    return EXIT_OK


def _read_jobs(path: str) -> MachineSchedulingInstance:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    jobs = []
    for j in doc["jobs"]:
        if isinstance(j, dict):
            jobs.append(Job(int(j["processing_time"]), float(j["weight"])))
        else:
            jobs.append(Job(int(j[0]), float(j[1])))
    return MachineSchedulingInstance(int(doc["machines"]), tuple(jobs), float(doc.get("threshold", 0.0)))


def cmd_reduce_pm(a: argparse.Namespace) -> int:
    inst, threshold = reduce_machine_scheduling(_read_jobs(a.jobs))
    write_instance(inst, a.out)
    print(json.dumps({"instance": str(a.out), "disutility_threshold": threshold}))
    return EXIT_OK


def cmd_sweep(a: argparse.Namespace) -> int:
    scenario = None if a.instance else _params(a)
    cfg = SweepConfig(
        instance_path=a.instance,
        scenario=scenario,
        p_values=tuple(a.p_values),
        q_values=tuple(a.q_values or ()),
        fleets=tuple(a.fleets),
        slot_minutes=tuple(a.slot_values or ()),
        copies=tuple(a.copies_values),
        engine=a.engine,
        time_limit=a.time_limit,
        node_limit=a.node_limit,
        restarts=a.restarts,
        seed=a.seed,
        penalty_due_day1=a.penalty_day1,
        penalty_due_day2=a.penalty_day2,
        single_period=not a.two_period_only,
        out_dir=a.out_dir,
        workers=a.workers,
        timing=not a.no_timing,
        hardware_note=a.hardware_note,
    )
    paths = run_sweep(cfg)
    print(json.dumps({k: str(v) for k, v in paths.items()}))
    return EXIT_OK


def cmd_plot(a: argparse.Namespace) -> int:
    doc, sched = read_solution(a.solution)
    inst = _load_variant(a, _solution_periods(doc))
    if sched is None:
        raise InvalidScheduleError(f"solution has status {doc.get('status')} and no schedule")
    cfg = _two_config(a)
    if cfg is None and "two_period" in doc:
        tp = doc["two_period"]
        cfg = TwoPeriodConfig(tp["relocation_budget"], tp["penalty_due_day1"], tp["penalty_due_day2"])
    write_geojson(a.out, emit_plot_data(inst, sched, cfg))
    return EXIT_OK


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dlsched", description="Drone platform location and scheduling.")
    parser.add_argument("--config", help="JSON file of option defaults (keys are option names without dashes)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic scenario")
    _scenario_args(p)
    p.add_argument("--copies", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("solve", help="solve a single-period (or mixed-fleet) instance")
    _solver_args(p)
    p.set_defaults(func=cmd_solve, Q=None)

    p = sub.add_parser("solve2", help="solve the two-period variant with overnight relocations")
    _solver_args(p)
    _two_period_args(p, required=True)
    p.set_defaults(func=cmd_solve2)

    p = sub.add_parser("validate", help="check a solution file against an instance")
    _variant_args(p)
    _two_period_args(p, required=False)
    p.add_argument("--solution", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("export-lp", help="write the time-slot ILP in LP format")
    _variant_args(p)
    _two_period_args(p, required=False)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_lp)

    p = sub.add_parser("reduce-pm", help="encode a Pm||sum wC instance as a DLS instance")
    p.add_argument("--jobs", required=True, help='JSON: {"machines": m, "jobs": [[p, w], ...], "threshold": K}')
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reduce_pm)

    p = sub.add_parser("sweep", help="run a grid of solves and write CSV tables")
    _scenario_args(p)
    p.add_argument("--instance", default=None, help="instance file (otherwise a scenario is generated)")
    p.add_argument("--p-values", type=int, nargs="+", required=True)
    p.add_argument("--q-values", type=int, nargs="*", default=None)
    p.add_argument("--fleets", nargs="+", default=["as-is"], choices=("short", "long", "mixed", "as-is"))
    p.add_argument("--slot-values", type=int, nargs="*", default=None, help="slot widths in minutes")
    p.add_argument("--copies-values", type=int, nargs="+", default=[1])
    p.add_argument("--engine", choices=("exact", "heuristic", "both"), default="exact")
    p.add_argument("--time-limit", type=float, default=60.0)
    p.add_argument("--node-limit", type=int, default=None)
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--penalty-day1", type=float, default=100.0)
    p.add_argument("--penalty-day2", type=float, default=50.0)
    p.add_argument("--two-period-only", action="store_true")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-timing", action="store_true", help="leave timing cells empty for byte-identical output")
    p.add_argument("--hardware-note", default="", help="written as a comment header line")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot", help="write GeoJSON for a solution")
    _variant_args(p)
    _two_period_args(p, required=False)
    p.add_argument("--solution", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> argparse.Namespace:
    """Config-file values become option defaults; explicit flags still win."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    if not known.config:
        return parser.parse_args(rest)
    try:
        overrides: Dict[str, Any] = json.loads(Path(known.config).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        parser.error(f"cannot read config {known.config}: {exc}")
    if not isinstance(overrides, dict):
        parser.error("config file must hold a JSON object")
    choices = parser._subparsers._group_actions[0].choices  # type: ignore[union-attr]
    command = next((t for t in rest if t in choices), None)
    if command is None:
        return parser.parse_args(rest)
    sub = choices[command]
    known_dests = {act.dest for act in sub._actions}
    norm = {k.replace("-", "_"): v for k, v in overrides.items()}
    unknown = sorted(set(norm) - known_dests)
    if unknown:
        parser.error(f"unknown config keys for {command}: {', '.join(unknown)}")
    sub.set_defaults(**norm)
    for act in sub._actions:
        if act.dest in norm:
            act.required = False
    return parser.parse_args(rest)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _apply_config(parser, argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except (InstanceError, InstanceFormatError, ModelBuildError, TooLargeError, ValueError) as exc:
        print(f"dlsched {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE if isinstance(exc, (InstanceFormatError, TooLargeError)) else EXIT_INVALID
    except (InvalidScheduleError, OSError, NotImplementedError) as exc:
        print(f"dlsched {args.command}: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
