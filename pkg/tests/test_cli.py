import csv
import json

import pytest

from dlsched.cli import main
from dlsched.core import ParametricCurve
from dlsched.geo import emit_plot_data, site_tag
from dlsched.instances import ScenarioParams, tiny_instance, write_instance
from dlsched.schedule import Schedule
from dlsched.solve import brute_force
from dlsched.sweep import COLUMNS, SweepConfig, fill_marginal_benefit, plan
from dlsched.verify import InvalidScheduleError

from conftest import UNIFORM


@pytest.fixture
def tiny_file(tmp_path, one_trip):
    return str(write_instance(one_trip, tmp_path / "tiny.json"))


def load(path):
    with open(path) as fh:
        return json.load(fh)


def test_solve_tiny_exact(tmp_path, tiny_file):
    out = tmp_path / "sol.json"
    assert main(["solve", "--instance", tiny_file, "--out", str(out), "--no-timing"]) == 0
    doc = load(out)
    assert doc["status"] == "Optimal"
    assert doc["objective"] == pytest.approx(0.04)
    assert doc["meta"]["seed"] == 0 and doc["stats"]["elapsed"] is None
    assert main(["validate", "--instance", tiny_file, "--solution", str(out)]) == 0


@pytest.mark.parametrize("engine", ["heuristic", "brute"])
def test_other_engines(tmp_path, tiny_file, engine):
    out = tmp_path / "sol.json"
    assert main(["solve", "--instance", tiny_file, "--out", str(out), "--engine", engine]) == 0
    assert load(out)["objective"] == pytest.approx(0.04)


def test_uncoverable_instance(tmp_path, capsys):
    inst = tiny_instance([[1, 0]], [UNIFORM, UNIFORM], p=1, slots=8)
    path = write_instance(inst, tmp_path / "u.json")
    out = tmp_path / "sol.json"
    code = main(["solve", "--instance", str(path), "--out", str(out)])
    assert code == 3
    doc = load(out)
    assert doc["status"] == "Infeasible" and doc["uncovered_demands"] == [1]
    assert "uncovered_demands" in capsys.readouterr().out


def test_tiny_budget_is_unknown_or_feasible_with_bound(tmp_path):
    inst_path = tmp_path / "big.json"
    assert main(["gen", "--out", str(inst_path), "--n-demands", "60", "--n-sites", "15", "--p", "8"]) == 0
    out = tmp_path / "sol.json"
    code = main(["solve", "--instance", str(inst_path), "--out", str(out), "--time-limit", "0.001"])
    doc = load(out)
    assert doc["status"] in ("Unknown", "Feasible")
    assert code == (4 if doc["status"] == "Unknown" else 0)
    assert doc["lower_bound"] is not None


def test_gen_is_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        assert main(["gen", "--out", str(path), "--seed", "5", "--n-demands", "12", "--n-sites", "4", "--p", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_solve2_validate_and_plot(tmp_path):
    inst = tiny_instance([[2, 0], [0, 2]], [UNIFORM, ParametricCurve(100, 100, 60)], p=1, slots=10)
    path = str(write_instance(inst, tmp_path / "i.json"))
    sol, geo = tmp_path / "s.json", tmp_path / "g.geojson"
    assert main(["solve2", "--instance", path, "--Q", "1", "--out", str(sol)]) == 0
    doc = load(sol)
    assert doc["status"] == "Optimal" and doc["relocations"] == [[0, 1]]
    assert main(["validate", "--instance", path, "--solution", str(sol)]) == 0
    assert main(["plot", "--instance", path, "--solution", str(sol), "--out", str(geo)]) == 0
    tags = {f["properties"]["id"]: f["properties"]["tag"] for f in load(geo)["features"] if f["properties"]["kind"] == "site"}
    assert tags == {0: "day1_only", 1: "day2_only"}
    assert main(["solve2", "--instance", path, "--Q", "0", "--out", str(sol)]) == 3


def test_validate_rejects_tampered_solution(tmp_path, tiny_file):
    out = tmp_path / "sol.json"
    main(["solve", "--instance", tiny_file, "--out", str(out)])
    doc = load(out)
    doc["trips"][0]["return_slot"] = 2
    doc["trips"][0]["depart_slot"] = 1
    out.write_text(json.dumps(doc))
    assert main(["validate", "--instance", tiny_file, "--solution", str(out)]) == 1


def test_export_lp(tmp_path, tiny_file):
    a, b = tmp_path / "a.lp", tmp_path / "b.lp"
    assert main(["export-lp", "--instance", tiny_file, "--out", str(a)]) == 0
    assert main(["export-lp", "--instance", tiny_file, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_reduce_pm(tmp_path, capsys):
    jobs = tmp_path / "jobs.json"
    jobs.write_text(json.dumps({"machines": 1, "jobs": [[2, 1], [4, 1]], "threshold": 8}))
    inst = tmp_path / "pm.json"
    assert main(["reduce-pm", "--jobs", str(jobs), "--out", str(inst)]) == 0
    assert json.loads(capsys.readouterr().out)["disutility_threshold"] == pytest.approx(5.0)
    sol = tmp_path / "s.json"
    assert main(["solve", "--instance", str(inst), "--out", str(sol)]) == 0
    assert load(sol)["objective"] == pytest.approx(5.0)


def test_usage_errors(tmp_path, tiny_file):
    assert main(["solve", "--instance", tiny_file]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["solve", "--instance", str(tmp_path / "missing.json"), "--out", "x.json"]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert main(["solve", "--instance", str(bad), "--out", str(tmp_path / "o.json")]) == 2


def test_config_file_supplies_options(tmp_path, tiny_file):
    out = tmp_path / "via-config.json"
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"instance": tiny_file, "out": str(out), "engine": "brute"}))
    assert main(["--config", str(cfg), "solve"]) == 0
    assert load(out)["meta"]["engine"] == "brute"
    # explicit flags beat the file
    assert main(["--config", str(cfg), "solve", "--engine", "exact"]) == 0
    assert load(out)["meta"]["engine"] == "exact"
    cfg.write_text(json.dumps({"no_such_option": 1}))
    assert main(["--config", str(cfg), "solve"]) == 2


def test_sweep_cli(tmp_path):
    inst = tiny_instance([[2, 3, 0], [0, 2, 2], [3, 0, 2]], [UNIFORM] * 3, p=1, slots=12)
    path = str(write_instance(inst, tmp_path / "i.json"))
    out = tmp_path / "sw"
    code = main(["sweep", "--instance", path, "--p-values", "1", "2", "--q-values", "0", "--out-dir", str(out), "--no-timing"])
    assert code == 0
    with open(out / "single_period.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert tuple(rows[0]) == COLUMNS
    assert [r["p"] for r in rows] == ["1", "2"]
    assert (out / "solutions" / "two_period_as-is-x1-exact_p2_Q0.json").exists()


# -- plot data --------------------------------------------------------------------


def test_plot_single_demand(one_trip):
    doc = emit_plot_data(one_trip, brute_force(one_trip).schedule)
    kinds = [(f["geometry"]["type"], f["properties"]["kind"]) for f in doc["features"]]
    assert sorted(kinds) == [("LineString", "trip"), ("Point", "demand"), ("Point", "site")]
    demand = next(f for f in doc["features"] if f["properties"]["kind"] == "demand")
    assert demand["properties"]["return_slot"] == 3 and demand["properties"]["serving_site"] == 0


def test_plot_rejects_invalid(one_trip):
    with pytest.raises(InvalidScheduleError):
        emit_plot_data(one_trip, Schedule((((0, 0),),), ()))


def test_site_tags():
    two = Schedule((((0, 0), (1, 0)), ((1, 0), (2, 0))), ())
    assert [site_tag(two, i) for i in range(4)] == ["day1_only", "both_days", "day2_only", "unselected"]
    one = Schedule((((1, 0),),), ())
    assert [site_tag(one, i) for i in range(2)] == ["unselected", "selected"]


# -- sweep pieces ------------------------------------------------------------------


def test_sweep_config_validation():
    with pytest.raises(ValueError):
        SweepConfig(p_values=(1,))
    with pytest.raises(ValueError):
        SweepConfig(scenario=ScenarioParams(), p_values=())
    with pytest.raises(ValueError):
        SweepConfig(scenario=ScenarioParams(), p_values=(1,), time_limit=0)
    with pytest.raises(ValueError):
        SweepConfig(scenario=ScenarioParams(), p_values=(1,), fleets=("huge",))


def test_plan_orders_runs():
    cfg = SweepConfig(scenario=ScenarioParams(fleet="long"), p_values=(3, 2), q_values=(1, 0), engine="both")
    tables = plan(cfg)
    assert [r.p for r in tables["single_period"]][:2] == [2, 3]
    assert len(tables["two_period"]) == 2 * 2 * 2
    assert tables["single_period"][0].variant == "long-x1-exact"


def test_marginal_benefit_fill():
    rows = [
        {"p": 1, "Q": None, "variant": "v", "disutility": None, "marginal_benefit_pct": None},
        {"p": 2, "Q": None, "variant": "v", "disutility": 200.0, "marginal_benefit_pct": None},
        {"p": 3, "Q": None, "variant": "v", "disutility": 150.0, "marginal_benefit_pct": None},
        {"p": 4, "Q": None, "variant": "v", "disutility": 130.0, "marginal_benefit_pct": None},
    ]
    fill_marginal_benefit(rows)
    assert [r["marginal_benefit_pct"] for r in rows] == [None, None, 25.0, 10.0]
