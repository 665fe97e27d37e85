import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dlsched.core import (
    Demand,
    DomainError,
    DroneType,
    FleetSpec,
    InstanceError,
    ParametricCurve,
    TabularCurve,
    TimeGrid,
    TwoPeriodConfig,
    delivery_time,
    eval_disutility,
    eval_due_penalty,
    eval_perishability,
    mixed_fleet_split,
)


def demand(A, B, d):
    return Demand(0, 0.0, 0.0, ParametricCurve(A, B, d))


@pytest.mark.parametrize("A,t,want", [(100, 0, 0.0), (100, 100, 100.0), (400, 50, 100.0)])
def test_perishability_values(A, t, want):
    assert eval_perishability(A, t) == pytest.approx(want, abs=1e-12)


@pytest.mark.parametrize("A,t", [(100, -1), (-1, 5)])
def test_perishability_rejects_negative_inputs(A, t):
    with pytest.raises(DomainError):
        eval_perishability(A, t)


@pytest.mark.parametrize("t,want", [(8, 0.0), (100, 100.0), (54, 25.0), (3, 0.0)])
def test_due_penalty_values(t, want):
    assert eval_due_penalty(100, 8, t) == pytest.approx(want, abs=1e-12)


@pytest.mark.parametrize("d", [100, 150, 0])
def test_due_penalty_rejects_degenerate_due_slot(d):
    with pytest.raises(DomainError):
        eval_due_penalty(100, d, 10)


def test_single_period_disutility():
    assert eval_disutility(demand(100, 100, 8), 2, TimeGrid(15, 48)) == pytest.approx(0.04)


def test_second_day_delivery_due_on_day_two():
    # 100 * 50^2 / 100^2 = 25 from the perishability term, nothing late, overnight penalty 50
    grid = TimeGrid(15, 48, 2)
    value = eval_disutility(demand(100, 100, 60), 50, grid, TwoPeriodConfig(1))
    assert value == pytest.approx(75.0)


def test_second_day_delivery_due_on_day_one():
    grid = TimeGrid(15, 48, 2)
    assert eval_disutility(demand(0, 100, 8), 54, grid, TwoPeriodConfig(1)) == pytest.approx(125.0)


def test_first_day_delivery_has_no_overnight_penalty():
    grid = TimeGrid(15, 48, 2)
    assert eval_disutility(demand(100, 0, 8), 48, grid, TwoPeriodConfig(0)) == pytest.approx(100 * 48**2 / 1e4)


def test_custom_overnight_penalties():
    grid = TimeGrid(15, 48, 2)
    cfg = TwoPeriodConfig(0, penalty_due_day1=7.0, penalty_due_day2=3.0)
    assert eval_disutility(demand(0, 0, 8), 60, grid, cfg) == pytest.approx(7.0)
    assert eval_disutility(demand(0, 0, 60), 60, grid, cfg) == pytest.approx(3.0)


def test_time_beyond_horizon_is_rejected():
    with pytest.raises(DomainError):
        eval_disutility(demand(1, 1, 8), 49, TimeGrid(15, 48))


@pytest.mark.parametrize("t,p,want", [(3, 2, 2.0), (7, 3, 5.5), (4, 4, 2.0)])
def test_delivery_time(t, p, want):
    assert delivery_time(t, p) == want


@pytest.mark.parametrize("p,want", [(10, (5, 5)), (1, (0, 1)), (7, (3, 4)), (2, (1, 1))])
def test_mixed_fleet_split(p, want):
    assert mixed_fleet_split(p) == want


def test_time_grid():
    g = TimeGrid.from_hours(12, 15, periods=2)
    assert g.slots_per_period == 48 and g.total_slots == 96
    assert g.period_start(2) == 48 and g.period_end(1) == 48
    assert g.period_of(48) == 1 and g.period_of(49) == 2
    assert TimeGrid.from_hours(12, 5).slots_per_period == 144
    with pytest.raises(InstanceError):
        TimeGrid(15, 48, 3)


def test_drone_type_invariants():
    with pytest.raises(InstanceError):
        DroneType(0, 0.0)
    with pytest.raises(InstanceError):
        DroneType(0, 10.0, speed_kmh=0.0)


def test_fleet_invariants():
    dt = DroneType(0, 30.0)
    assert FleetSpec.homogeneous(dt, 3).total == 3
    with pytest.raises(InstanceError):
        FleetSpec((dt,), (0,))
    with pytest.raises(InstanceError):
        FleetSpec((DroneType(1, 30.0),), (1,))


def test_relocation_budget_non_negative():
    with pytest.raises(InstanceError):
        TwoPeriodConfig(-1)


def test_tabular_curve_interpolates_and_enforces_monotonicity():
    c = TabularCurve((0, 2, 4, 10))
    assert c(1.5) == pytest.approx(3.0)
    assert c(3) == 10.0
    np.testing.assert_allclose(c.many(np.array([0.5, 2.5])), [1.0, 7.0])
    with pytest.raises(DomainError, match="decreases"):
        TabularCurve((0, 3, 2))
    with pytest.raises(DomainError):
        c(3.5)


curves = st.builds(
    ParametricCurve,
    st.floats(0, 1000),
    st.floats(0, 1000),
    st.integers(1, 99),
)


@given(curves, st.floats(0, 99), st.floats(0, 99))
def test_disutility_is_non_decreasing(curve, a, b):
    lo, hi = min(a, b), max(a, b)
    assert curve(lo) <= curve(hi) + 1e-12


@given(curves, st.lists(st.floats(0, 99), min_size=1, max_size=20))
def test_vectorised_curve_matches_scalar(curve, ts):
    np.testing.assert_allclose(curve.many(np.array(ts)), [curve(t) for t in ts], rtol=1e-12, atol=1e-12)


@given(curves, st.integers(1, 96))
def test_overnight_penalty_only_on_day_two(curve, slot):
    grid = TimeGrid(15, 48, 2)
    d = Demand(0, 0, 0, curve)
    extra = eval_disutility(d, slot, grid, TwoPeriodConfig(0)) - eval_disutility(d, slot, grid)
    if slot <= 48:
        assert extra == 0
    else:
        assert math.isclose(extra, 50.0 if curve.due_slot > 48 else 100.0)
