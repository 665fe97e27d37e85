"""Acceptance criteria 1-10. Each test records a one-line summary printed at the end of the run."""
import csv
import itertools
import time
from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest

from dlsched.cli import main
from dlsched.core import ParametricCurve, TwoPeriodConfig
from dlsched.ilp import build_single_period, build_two_period, decode, export_lp, read_lp_counts
from dlsched.instances import (
    Job,
    MachineSchedulingInstance,
    ScenarioParams,
    generate_scenario,
    random_tiny_instance,
    reduce_machine_scheduling,
    tiny_instance,
)
from dlsched.schedule import Schedule, Status, Trip
from dlsched.solve import brute_force, solve_exact, solve_heuristic
from dlsched.verify import marginal_benefit, recompute_objective, validate


# -- 1 ----------------------------------------------------------------------------


def test_criterion_1_oracle_equivalence(record_property):
    started = time.perf_counter()
    mismatches = []
    feasible = 0
    for seed in range(200):
        inst = random_tiny_instance(seed)
        brute, exact = brute_force(inst), solve_exact(inst)
        if exact.status is not brute.status:
            mismatches.append((seed, brute.status, exact.status))
            continue
        if brute.objective is not None:
            feasible += 1
            if abs(exact.objective - brute.objective) > 1e-9 or not validate(inst, exact.schedule).ok:
                mismatches.append((seed, brute.objective, exact.objective))
    elapsed = time.perf_counter() - started
    record_property("detail", f"200 instances ({feasible} feasible), {len(mismatches)} mismatches, {elapsed:.1f}s")
    assert not mismatches
    assert elapsed < 300


# -- 2 ----------------------------------------------------------------------------


def twct_oracle(m, jobs):
    """Minimum total weighted completion time by enumeration over job subsets."""
    n = len(jobs)
    full = (1 << n) - 1
    length = [sum(jobs[j][0] for j in range(n) if S >> j & 1) for S in range(full + 1)]
    # one machine: the last job of subset S completes at length[S]
    single = [0.0] * (full + 1)
    for S in range(1, full + 1):
        single[S] = min(single[S ^ (1 << j)] + jobs[j][1] * length[S] for j in range(n) if S >> j & 1)

    @lru_cache(maxsize=None)
    def split(machines, S):
        if machines == 1 or S == 0:
            return single[S]
        best = single[S] + split(machines - 1, 0)
        sub = S
        while sub:
            best = min(best, single[sub] + split(machines - 1, S ^ sub))
            sub = (sub - 1) & S
        return best

    return split(m, full)


def test_criterion_2_machine_scheduling_reduction(record_property):
    rng = np.random.default_rng(11)
    started = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        m = int(rng.integers(1, 4))
        n = int(rng.integers(1, 9))
        jobs = [(int(rng.integers(1, 6)), float(rng.integers(1, 10))) for _ in range(n)]
        msi = MachineSchedulingInstance(m, tuple(Job(p, w) for p, w in jobs))
        inst, _ = reduce_machine_scheduling(msi)
        assert inst.setup_slots == 0
        res = solve_exact(inst)
        assert res.status is Status.OPTIMAL
        want = twct_oracle(m, jobs) - sum(w * p for p, w in jobs) / 2
        worst = max(worst, abs(res.objective - want))
        assert res.objective == pytest.approx(want, abs=1e-9)
    elapsed = time.perf_counter() - started
    record_property("detail", f"50 instances, max |DLS - (TWCT - sum w p/2)| = {worst:.2e}, {elapsed:.1f}s")
    assert elapsed < 120


# -- 3 ----------------------------------------------------------------------------

SUBSPACE_LIMIT = 20_000
FULL_SPACE_COLUMNS = 16


def bijection_family(count=50, seed=2024):
    """Seeded instances with <= 4 demands, <= 2 sites, <= 12 slots whose assignment subspace is enumerable."""
    rng = np.random.default_rng(seed)
    family = []
    while len(family) < count:
        n = int(rng.integers(1, 5))
        m = int(rng.integers(1, 3))
        T = int(rng.integers(4, 13))
        p = int(rng.integers(1, m + 1))
        rt = np.where(rng.random((m, n)) < 0.8, rng.integers(1, max(2, T // 2) + 1, size=(m, n)), 0)
        curves = [
            ParametricCurve(float(rng.integers(50, 1001)), float(rng.integers(50, 1001)), int(rng.integers(1, T + 1)))
            for _ in range(n)
        ]
        inst = tiny_instance(rt.tolist(), curves, p, T)
        if inst.uncoverable:
            continue
        model = build_single_period(inst, symmetry_breaking=False)
        per_demand = [[j for j, c in enumerate(model.columns) if c.kind == "x" and c.demand == k] for k in range(n)]
        size = int(np.prod([len(c) for c in per_demand])) * 2**m
        if size > SUBSPACE_LIMIT:
            continue
        family.append((inst, model, per_demand))
    return family


def check_vectors(inst, model, xs):
    feasible = model.feasible_many(xs)
    agree, hits = 0, 0
    for x, ok in zip(xs, feasible):
        sched = decode(model, inst, x)
        valid = validate(inst, sched).ok
        assert bool(ok) == valid, f"model says {ok}, validator says {valid} for {sched}"
        if valid:
            hits += 1
            assert model.value(x) == pytest.approx(recompute_objective(inst, sched), abs=1e-9)
        agree += 1
    return agree, hits


def test_criterion_3_ilp_validator_bijection(record_property):
    rng = np.random.default_rng(5)
    vectors = feasible = full = 0
    family = bijection_family()
    for inst, model, per_demand in family:
        ys = [j for j, c in enumerate(model.columns) if c.kind == "y"]
        rows = []
        for xs in itertools.product(*per_demand):
            for bits in itertools.product((0, 1), repeat=len(ys)):
                x = np.zeros(model.n_columns)
                x[list(xs)] = 1
                x[ys] = bits
                rows.append(x)
        batch = np.array(rows)
        # vectors that leave a demand unserved or serve it twice
        off = (rng.random((200, model.n_columns)) < 0.15).astype(float)
        flips = batch[rng.integers(len(batch), size=200)].copy()
        flips[np.arange(200), rng.integers(model.n_columns, size=200)] += 1
        flips %= 2
        sets = [batch, off, flips]
        if model.n_columns <= FULL_SPACE_COLUMNS:
            # small enough for every binary vector
            n = model.n_columns
            sets.append(((np.arange(2**n)[:, None] >> np.arange(n)) & 1).astype(float))
            full += 1
        for xs in sets:
            a, h = check_vectors(inst, model, xs)
            vectors += a
            feasible += h
    record_property(
        "detail",
        f"{len(family)} instances ({full} over the full 2^n space), {vectors} vectors ({feasible} feasible), "
        "model feasibility == validator verdict",
    )
    assert len(family) == 50 and feasible > 0


# -- 4 ----------------------------------------------------------------------------


def test_criterion_4_marginal_benefit_fixture(record_property):
    values = [1184.74, 838.80, 665.17, 543.06, 466.04, 407.95]
    got = marginal_benefit(list(zip(range(11, 17), values)))
    want = [29.2, 14.7, 10.3, 6.5, 4.9]
    record_property("detail", "computed " + ", ".join(f"{v:.2f}" for v in got))
    assert got == pytest.approx(want, abs=0.1)


# -- 5 ----------------------------------------------------------------------------


def monotone_instance(**kw):
    return generate_scenario(ScenarioParams(n_demands=12, n_sites=9, seed=0, region=(0, 0, 60, 60), **kw))


def test_criterion_5_monotonicity(record_property):
    by_fleet = {}
    for fleet in ("short", "long"):
        series = []
        for p in range(1, 10):
            res = solve_exact(monotone_instance(p=p, fleet=fleet))
            assert res.status in (Status.OPTIMAL, Status.INFEASIBLE)
            series.append(res.objective)
        by_fleet[fleet] = series
    long_ = by_fleet["long"]
    feasible = [v for v in long_ if v is not None]
    assert len(feasible) >= 5
    # feasibility flips once, from Infeasible to Feasible
    flags = [v is not None for v in long_]
    assert sum(a != b for a, b in zip(flags, flags[1:])) == 1 and not flags[0]
    for series in by_fleet.values():
        vals = [v for v in series if v is not None]
        assert all(b <= a + 1e-9 for a, b in zip(vals, vals[1:]))
    # a longer range never hurts; an infeasible short-range run counts as worse
    for s, l in zip(by_fleet["short"], long_):
        assert l is not None or s is None
        if s is not None:
            assert l <= s + 1e-9

    two = [
        solve_exact(monotone_instance(p=2, fleet="long", periods=2, horizon_hours=4), TwoPeriodConfig(q))
        for q in (0, 1, 2)
    ]
    assert all(r.status is Status.OPTIMAL for r in two)
    qs = [r.objective for r in two]
    assert all(b <= a + 1e-9 for a, b in zip(qs, qs[1:]))
    record_property(
        "detail",
        "long p=1..9: "
        + " ".join("inf" if v is None else f"{v:.2f}" for v in long_)
        + "; Q=0,1,2: "
        + " ".join(f"{v:.2f}" for v in qs),
    )


# -- 6 ----------------------------------------------------------------------------


def rescue_instance():
    # sites 0 and 1 cover the six regular demands; site 2 alone covers demand 6.
    # each site fits two trips per day, so the regular demands need both 0 and 1 on day 1.
    regular = ParametricCurve(100.0, 900.0, 3)
    late = ParametricCurve(100.0, 100.0, 10)
    rt = [[2] * 6 + [0], [2] * 6 + [0], [0] * 6 + [2]]
    return tiny_instance(rt, [regular] * 6 + [late], p=2, slots=6, periods=2)


def test_criterion_6_relocation_rescue(record_property):
    inst = rescue_instance()
    verdicts = {}
    for q in (0, 1):
        cfg = TwoPeriodConfig(q)
        exact, brute = solve_exact(inst, cfg), brute_force(inst, cfg)
        assert exact.status is brute.status
        if brute.objective is not None:
            assert exact.objective == pytest.approx(brute.objective, abs=1e-9)
            assert validate(inst, exact.schedule, cfg).ok
        verdicts[q] = exact
    assert verdicts[0].status is Status.INFEASIBLE
    assert verdicts[1].status is Status.OPTIMAL
    day1 = verdicts[1].schedule.selected_sites(1)
    assert 2 not in day1 and 2 in verdicts[1].schedule.selected_sites(2)
    record_property(
        "detail",
        f"Q=0 {verdicts[0].status.value}, Q=1 {verdicts[1].status.value} "
        f"(objective {verdicts[1].objective:.2f}, day-1 sites {list(day1)}), brute force agrees",
    )


# -- 7 ----------------------------------------------------------------------------


def mutation_base():
    inst = tiny_instance([[2, 2], [2, 0], [2, 2]], [ParametricCurve(100, 100, 8)] * 2, p=2, slots=10, periods=2)
    sel = ((0, 0), (1, 0))
    trips = (Trip.make(0, 0, 3, 2), Trip.make(0, 1, 6, 2))
    return inst, Schedule((sel, sel), trips), TwoPeriodConfig(0)


def mutations(base):
    t0, t1 = base.trips
    sel = base.selected[0]
    return {
        "Assign": Schedule(base.selected, (t0,)),
        "Coverage": Schedule(base.selected, (t0, Trip.make(1, 1, 3, 2))),
        "Capacity": Schedule(base.selected, (t0, Trip.make(0, 1, 5, 2))),
        "FirstFlight": Schedule(base.selected, (Trip.make(0, 0, 2, 2), t1)),
        "Count": Schedule((sel + ((2, 0),), sel + ((2, 0),)), base.trips),
        "RelocBudget": Schedule((sel, ((1, 0), (2, 0))), base.trips),
        "Horizon": Schedule(base.selected, (t0, Trip.make(0, 1, 11, 2, period=1))),
    }


def test_criterion_7_validator_mutations(record_property):
    inst, base, cfg = mutation_base()
    assert validate(inst, base, cfg).ok
    seen = {}
    for family, mutant in mutations(base).items():
        seen[family] = sorted(validate(inst, mutant, cfg).families)
    record_property("detail", "; ".join(f"{k} -> {v}" for k, v in seen.items()))
    assert all(v == [k] for k, v in seen.items())


# -- 8 ----------------------------------------------------------------------------


def test_criterion_8_scale_smoke(record_property):
    params = ScenarioParams(p=15, fleet="long")
    inst = generate_scenario(params)
    assert (inst.n, inst.m, inst.grid.slots_per_period) == (100, 25, 48)
    assert all(50 <= d.curve.A <= 1000 and 50 <= d.curve.B <= 1000 and 8 <= d.curve.due_slot <= 32 for d in inst.demands)

    started = time.perf_counter()
    heur = solve_heuristic(inst, time_limit=60)
    h_time = time.perf_counter() - started
    assert heur.status is Status.FEASIBLE and h_time < 60
    assert validate(inst, heur.schedule).ok and heur.schedule.served_in(1) == 100

    started = time.perf_counter()
    exact = solve_exact(inst, time_limit=600, node_limit=2000)
    e_time = time.perf_counter() - started
    assert exact.schedule is not None and validate(inst, exact.schedule).ok
    assert exact.schedule.served_in(1) == 100
    assert exact.objective <= heur.objective + 1e-9
    assert exact.lower_bound is not None and 0 <= exact.lower_bound <= exact.objective
    record_property(
        "detail",
        f"heuristic {heur.objective:.2f} in {h_time:.1f}s; exact incumbent {exact.objective:.2f}, "
        f"bound {exact.lower_bound:.2f}, {exact.stats.nodes} nodes in {e_time:.1f}s",
    )


# -- 9 ----------------------------------------------------------------------------


SWEEP_ARGS = [
    "sweep", "--n-demands", "12", "--n-sites", "9", "--region", "0", "0", "60", "60", "--horizon-hours", "4",
    "--seed", "3", "--fleet", "long", "--p-values", "2", "3", "4", "--q-values", "0", "1", "--no-timing",
]


def snapshot(root: Path):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def column(path, name):
    with open(path) as fh:
        return [row[name] for row in csv.DictReader(fh)]


def test_criterion_9_determinism(tmp_path, record_property):
    runs = []
    for j in range(2):
        out = tmp_path / f"run{j}"
        assert main(SWEEP_ARGS + ["--out-dir", str(out)]) == 0
        runs.append(snapshot(out))
    assert runs[0] == runs[1]
    par = tmp_path / "parallel"
    assert main(SWEEP_ARGS + ["--out-dir", str(par), "--workers", "2"]) == 0
    for table in ("single_period.csv", "two_period.csv"):
        a = column(tmp_path / "run0" / table, "disutility")
        b = column(par / table, "disutility")
        assert a == b
        assert column(tmp_path / "run0" / table, "status") == column(par / table, "status")
    record_property(
        "detail",
        f"{len(runs[0])} files byte-identical across two runs; 2 workers reproduce objectives "
        + str(column(par / "two_period.csv", "disutility")),
    )


# -- 10 ---------------------------------------------------------------------------


def test_criterion_10_lp_export(tmp_path, record_property):
    curve = ParametricCurve(100.0, 100.0, 8)
    single = tiny_instance([[1] * 3, [1] * 3], [curve] * 3, p=1, slots=10)
    two = tiny_instance([[2, 3], [3, 2], [1, 1]], [curve] * 2, p=2, slots=12, periods=2)
    cases = {
        # X columns: every (site, demand) pair returns at slots rt+s .. T
        "single": (build_single_period(single), 2 * 3 * 9 + 2, 3 + 1 + 2 * (2 * 3 * 9)),
    }
    model2 = build_two_period(two, TwoPeriodConfig(1))
    n_x2 = sum(12 - rt for row in [[2, 3], [3, 2], [1, 1]] for rt in row) * 2
    # Assign + Capacity + Link + Count per day + RelocLB (2 per site) + RelocBudget
    cases["two"] = (model2, n_x2 + 3 * 2 + 3, 2 + 2 * n_x2 + 2 + 2 * 3 + 1)
    lines = []
    for name, (model, cols, rows) in cases.items():
        a = export_lp(model, tmp_path / f"{name}.lp")
        counts = read_lp_counts(a)
        assert counts == {"rows": rows, "variables": cols, "binaries": cols}
        b = export_lp(model, tmp_path / f"{name}-again.lp")
        assert a.read_bytes() == b.read_bytes()
        lines.append(f"{name}: {cols} columns, {rows} rows")
    record_property("detail", "; ".join(lines) + "; re-export byte-identical")
