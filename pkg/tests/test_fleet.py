"""Device/fleet model, validation, and the state update."""

import math

import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from helpers import fleets_with_state
from ucap.demo import demo_fleet
from ucap.errors import ConfigInvalid, PreconditionViolation
from ucap.fleet import (
    Device,
    Fleet,
    FleetState,
    apply_input,
    read_fleet_csv,
    scale_fleet,
    validate_fleet,
)


def test_validate_demo_fleet_is_clean():
    assert validate_fleet(demo_fleet()) == []


def test_validate_empty_fleet_is_clean():
    assert validate_fleet(Fleet(())) == []


def test_validate_zero_efficiency_names_field():
    dev = Device("a", 2.0, 1.0, 2.0, -1.0, efficiency=0.0)
    violations = validate_fleet(Fleet((dev,)))
    assert len(violations) == 1
    assert "efficiency" in violations[0]
    assert "'a'" in violations[0]


@pytest.mark.parametrize(
    "device,field",
    [
        (Device("a", 0.0, 1.0, 2.0), "max_discharge_kw"),
        (Device("a", -1.0, 1.0, 2.0), "max_discharge_kw"),
        (Device("a", 2.0, -1.0, 2.0), "energy_kwh"),
        (Device("a", 2.0, 3.0, 2.0), "capacity_kwh"),
        (Device("a", 2.0, 1.0, 2.0, max_charge_kw=1.0), "max_charge_kw"),
        (Device("a", 2.0, 1.0, 2.0, efficiency=1.5), "efficiency"),
        (Device("a", 2.0, float("nan"), 2.0), "energy_kwh"),
    ],
)
def test_validate_flags_each_field(device, field):
    violations = validate_fleet(Fleet((device,)))
    assert any(field in v for v in violations)


def test_validate_duplicate_ids():
    dev = Device("a", 2.0, 1.0, 2.0)
    violations = validate_fleet(Fleet((dev, dev)))
    assert any("duplicates" in v for v in violations)


def test_derived_time_to_go():
    dev = Device("a", 4.0, 12.0, 16.0)
    assert dev.time_to_go_h == 3.0
    assert dev.max_time_to_go_h == 4.0


def test_fleet_views():
    fleet = demo_fleet()
    assert fleet.max_discharge_kw == (2.0, 4.0, 3.0, 7.0)
    assert fleet.total_discharge_kw == 16.0
    assert fleet.total_charge_kw == -16.0
    assert fleet.initial_state().x == (4.0, 3.0, 2.0, 1.0)
    assert fleet.full_state().x == (4.0, 3.0, 2.0, 1.0)


def test_apply_input_demo_transition():
    fleet = demo_fleet()
    state = FleetState((4.0, 3.0, 2.0, 1.0))
    after = apply_input(state, fleet, (2.0, 2.0, 0.0, 0.0), 1.0)
    assert after.x == (3.0, 2.5, 2.0, 1.0)
    assert state.x == (4.0, 3.0, 2.0, 1.0)  # value semantics


def test_apply_input_zero_is_identity():
    fleet = demo_fleet()
    state = FleetState((1.5, 0.25, 2.0, 0.0))
    assert apply_input(state, fleet, (0.0,) * 4, 0.5).x == state.x


def test_apply_input_charging_with_efficiency():
    fleet = Fleet((Device("a", 2.0, 0.0, 4.0, -2.0, efficiency=1.0),))
    after = apply_input(FleetState((0.0,)), fleet, (-2.0,), 1.0)
    assert after.x == (1.0,)


def test_apply_input_rejects_excess_discharge():
    fleet = Fleet((Device("a", 2.0, 8.0, 8.0),))
    with pytest.raises(PreconditionViolation):
        apply_input(FleetState((4.0,)), fleet, (2.1,), 1.0)
    # interval-limited: only 0.5 h of charge left
    with pytest.raises(PreconditionViolation):
        apply_input(FleetState((0.5,)), fleet, (1.5,), 1.0)


def test_apply_input_rejects_charge_beyond_rating_or_capacity():
    fleet = Fleet((Device("a", 2.0, 0.0, 4.0, -2.0),))
    with pytest.raises(PreconditionViolation):
        apply_input(FleetState((0.0,)), fleet, (-2.5,), 1.0)
    nearly_full = Fleet((Device("a", 2.0, 0.0, 2.0, -8.0),))
    with pytest.raises(PreconditionViolation):
        apply_input(FleetState((0.9,)), nearly_full, (-4.0,), 1.0)


def test_apply_input_rejects_bad_dt_and_lengths():
    fleet = demo_fleet()
    state = fleet.initial_state()
    with pytest.raises(PreconditionViolation):
        apply_input(state, fleet, (0.0,) * 4, 0.0)
    with pytest.raises(PreconditionViolation):
        apply_input(state, fleet, (0.0,) * 3, 1.0)


def test_fleet_csv_round_trip(tmp_path):
    path = tmp_path / "fleet.csv"
    path.write_text(
        "id,max_discharge_kw,energy_kwh,capacity_kwh,max_charge_kw,efficiency\n"
        "d1,2,8,8,-2,1.0\n"
        "d2,4,12,12,-4,0.9\n"
    )
    fleet = read_fleet_csv(path)
    assert fleet.ids == ("d1", "d2")
    assert fleet.devices[1].efficiency == 0.9
    assert validate_fleet(fleet) == []


def test_fleet_csv_rejects_missing_and_unknown_columns(tmp_path):
    path = tmp_path / "fleet.csv"
    path.write_text("id,max_discharge_kw,energy_kwh\nd1,2,8\n")
    with pytest.raises(ConfigInvalid):
        read_fleet_csv(path)
    path.write_text(
        "id,max_discharge_kw,energy_kwh,capacity_kwh,max_charge_kw,efficiency,extra\n"
        "d1,2,8,8,-2,1.0,0\n"
    )
    with pytest.raises(ConfigInvalid):
        read_fleet_csv(path)


def test_fleet_csv_rejects_bad_value(tmp_path):
    path = tmp_path / "fleet.csv"
    path.write_text(
        "id,max_discharge_kw,energy_kwh,capacity_kwh,max_charge_kw,efficiency\n"
        "d1,two,8,8,-2,1.0\n"
    )
    with pytest.raises(ConfigInvalid):
        read_fleet_csv(path)


def test_scale_fleet():
    scaled = scale_fleet(demo_fleet(), 1e-3)
    assert scaled.max_discharge_kw == (0.002, 0.004, 0.003, 0.007)
    # time-to-go is unit-invariant
    assert scaled.initial_state().x == demo_fleet().initial_state().x


@given(fleets_with_state(), st.data())
@settings(max_examples=100, deadline=None)
def test_discharge_runs_keep_state_nonnegative_and_account_energy(params, data):
    fleet, state = params
    steps = data.draw(st.integers(1, 5))
    served = 0.0
    start = state
    for _ in range(steps):
        dt = data.draw(st.sampled_from([0.25, 0.5, 1.0]))
        u = []
        for dev, xi in zip(fleet.devices, state.x):
            cap = dev.max_discharge_kw * min(xi / dt, 1.0)
            u.append(cap * data.draw(st.floats(0.0, 1.0)))
        state = apply_input(state, fleet, tuple(u), dt)
        served += sum(u) * dt
        assert all(xi >= -1e-9 for xi in state.x)
    drained = sum(
        p * (x0 - x1)
        for p, x0, x1 in zip(fleet.max_discharge_kw, start.x, state.x)
    )
    scale = max(1.0, abs(served))
    assert math.isclose(drained, served, rel_tol=0, abs_tol=1e-9 * scale)


@given(fleets_with_state())
@settings(max_examples=50, deadline=None)
def test_apply_input_deterministic(params):
    fleet, state = params
    u = tuple(0.5 * p * min(xi, 1.0) for p, xi in zip(fleet.max_discharge_kw, state.x))
    once = apply_input(state, fleet, u, 1.0)
    twice = apply_input(state, fleet, u, 1.0)
    assert once == twice
