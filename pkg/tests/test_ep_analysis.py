"""E-p transforms, capacity curves, gaps, shaving, and classification."""

import math

import pytest
from hypothesis import given, settings

from helpers import fleets_with_state, nonnegative_signals
from ucap.demo import demo_fleet, demo_reference
from ucap.ep_analysis import (
    EpCurve,
    Infeasibility,
    capacity_curve,
    check_feasibility,
    classify_infeasibility,
    ep_transform,
    max_energy_gap,
    shave_level,
)
from ucap.errors import GapExceedsEnergy, NegativeSignal, PreconditionViolation
from ucap.fleet import Device, Fleet, FleetState
from ucap.signals import StepSignal, cap_signal, step_signal_from_samples


@pytest.fixture
def demo_curves():
    fleet = demo_fleet()
    reference = ep_transform(demo_reference())
    capacity = capacity_curve(fleet, fleet.initial_state())
    return fleet, reference, capacity


def test_ep_transform_demo_values(demo_curves):
    _, curve, _ = demo_curves
    assert curve.value_at(0.0) == 35.0
    assert curve.value_at(6.0) == 18.0
    assert curve.value_at(12.0) == 6.0
    assert curve.value_at(18.0) == 0.0
    assert curve.peak_kw == 18.0


def test_ep_transform_zero_signal():
    curve = ep_transform(StepSignal((), ()))
    assert curve.powers == (0.0,)
    assert all(curve.value_at(p) == 0.0 for p in (0.0, 1.0, 100.0))


def test_ep_transform_single_rectangle():
    curve = ep_transform(step_signal_from_samples([5.0], 2.0))
    for p in (0.0, 1.0, 2.5, 4.0, 5.0, 9.0):
        assert curve.value_at(p) == 2.0 * max(5.0 - p, 0.0)


def test_ep_transform_rejects_negative_signal():
    with pytest.raises(NegativeSignal):
        ep_transform(step_signal_from_samples([4.0, -1.0], 1.0))


def test_capacity_curve_demo_values(demo_curves):
    _, _, capacity = demo_curves
    assert capacity.value_at(0.0) == 33.0
    assert capacity.value_at(6.0) == 13.0
    assert capacity.value_at(16.0) == 0.0


def test_capacity_curve_empty_or_depleted_fleet():
    assert capacity_curve(Fleet(()), FleetState(())).value_at(0.0) == 0.0
    fleet = Fleet((Device("a", 2.0, 0.0, 4.0),))
    curve = capacity_curve(fleet, FleetState((0.0,)))
    assert curve.value_at(0.0) == 0.0


def test_capacity_curve_rejects_state_mismatch():
    with pytest.raises(PreconditionViolation):
        capacity_curve(demo_fleet(), FleetState((1.0,)))


def test_max_energy_gap_demo(demo_curves):
    _, curve, capacity = demo_curves
    assert max_energy_gap(curve, capacity) == 5.0


def test_max_energy_gap_dominated_is_zero(demo_curves):
    _, _, capacity = demo_curves
    small = ep_transform(step_signal_from_samples([2.0], 1.0))
    assert max_energy_gap(small, capacity) == 0.0


def test_max_energy_gap_single_device():
    fleet = Fleet((Device("a", 1.0, 1.0, 1.0),))
    capacity = capacity_curve(fleet, FleetState((1.0,)))
    reference = ep_transform(step_signal_from_samples([2.0], 1.0))
    assert max_energy_gap(reference, capacity) == 1.0


def test_shave_level_demo(demo_curves):
    _, curve, _ = demo_curves
    assert shave_level(curve, 5.0) == 13.0
    assert shave_level(curve, 0.0) == 18.0


def test_shave_level_single_device_case():
    curve = ep_transform(step_signal_from_samples([2.0], 1.0))  # E(p) = 2 - p
    assert shave_level(curve, 1.0) == 1.0


def test_shave_level_errors(demo_curves):
    _, curve, _ = demo_curves
    with pytest.raises(GapExceedsEnergy):
        shave_level(curve, 36.0)
    with pytest.raises(PreconditionViolation):
        shave_level(curve, -1.0)


def test_check_feasibility_cases(demo_curves):
    _, curve, capacity = demo_curves
    assert not check_feasibility(curve, capacity)
    small = ep_transform(step_signal_from_samples([2.0], 1.0))
    assert check_feasibility(small, capacity)
    empty_capacity = capacity_curve(Fleet(()), FleetState(()))
    assert not check_feasibility(small, empty_capacity)


def test_classify_demo_power_and_energy(demo_curves):
    fleet, curve, capacity = demo_curves
    kind = classify_infeasibility(
        curve, capacity, demo_reference().peak_kw, fleet.total_discharge_kw
    )
    assert kind is Infeasibility.POWER_AND_ENERGY


def test_classify_feasible(demo_curves):
    fleet, _, capacity = demo_curves
    small = ep_transform(step_signal_from_samples([2.0], 1.0))
    kind = classify_infeasibility(small, capacity, 2.0, fleet.total_discharge_kw)
    assert kind is Infeasibility.FEASIBLE


def test_classify_heterogeneity():
    fleet = Fleet(
        (Device("fast", 10.0, 1.0, 1.0), Device("slow", 1.0, 10.0, 10.0))
    )
    state = FleetState((0.1, 10.0))
    reference = step_signal_from_samples([2.0], 5.0)
    curve = ep_transform(reference)
    capacity = capacity_curve(fleet, state)
    assert curve.value_at(0.0) <= capacity.value_at(0.0)
    assert reference.peak_kw <= fleet.total_discharge_kw
    assert max_energy_gap(curve, capacity) > 0
    kind = classify_infeasibility(
        curve, capacity, reference.peak_kw, fleet.total_discharge_kw
    )
    assert kind is Infeasibility.HETEROGENEITY


def test_classify_energy_alone():
    fleet = Fleet((Device("a", 10.0, 5.0, 5.0),))
    reference = step_signal_from_samples([2.0], 5.0)  # 10 kWh, peak 2 < 10
    curve = ep_transform(reference)
    capacity = capacity_curve(fleet, fleet.initial_state())  # 5 kWh stored
    kind = classify_infeasibility(curve, capacity, 2.0, 10.0)
    assert kind is Infeasibility.ENERGY


def test_classify_power_alone():
    fleet = Fleet((Device("a", 1.0, 10.0, 10.0),))
    reference = step_signal_from_samples([2.0], 1.0)  # peak 2 > 1, energy 2 < 10
    curve = ep_transform(reference)
    capacity = capacity_curve(fleet, fleet.initial_state())
    kind = classify_infeasibility(curve, capacity, 2.0, 1.0)
    assert kind is Infeasibility.POWER


def test_epcurve_constructor_rejects_bad_shapes():
    with pytest.raises(ValueError):
        EpCurve((0.0, 1.0), (1.0, 0.5))  # does not end at zero
    with pytest.raises(ValueError):
        EpCurve((0.0, 1.0), (0.5, 1.0))  # increasing
    with pytest.raises(ValueError):
        EpCurve((0.0, 1.0, 2.0), (2.0, 0.2, 0.0))  # concave kink


def _assert_convex_nonincreasing(curve: EpCurve) -> None:
    energies = curve.energies
    powers = curve.powers
    slack = 1e-9 * max(1.0, energies[0])
    assert all(e1 <= e0 + slack for e0, e1 in zip(energies, energies[1:]))
    slopes = [
        (e1 - e0) / (p1 - p0)
        for p0, p1, e0, e1 in zip(powers, powers[1:], energies, energies[1:])
    ]
    assert all(s1 >= s0 - slack for s0, s1 in zip(slopes, slopes[1:]))
    assert energies[-1] == 0.0


@given(nonnegative_signals())
@settings(max_examples=100, deadline=None)
def test_ep_transform_curves_are_convex_nonincreasing(signal):
    _assert_convex_nonincreasing(ep_transform(signal))


@given(fleets_with_state())
@settings(max_examples=100, deadline=None)
def test_capacity_curves_are_convex_nonincreasing(params):
    fleet, state = params
    curve = capacity_curve(fleet, state)
    _assert_convex_nonincreasing(curve)
    stored = sum(p * xi for p, xi in zip(fleet.max_discharge_kw, state.x))
    assert math.isclose(curve.value_at(0.0), stored, rel_tol=1e-12, abs_tol=1e-12)
    assert curve.value_at(fleet.total_discharge_kw) == 0.0


@given(fleets_with_state(), nonnegative_signals(max_steps=5))
@settings(max_examples=150, deadline=None)
def test_capped_transform_identity(params, signal):
    """Shaving removes exactly the gap from the transform, floored at zero."""
    fleet, state = params
    curve = ep_transform(signal)
    capacity = capacity_curve(fleet, state)
    gap = max_energy_gap(curve, capacity)
    if gap <= 0:
        return
    level = shave_level(curve, gap)
    capped = ep_transform(cap_signal(signal, level))
    for p in sorted({*curve.powers, *capped.powers}):
        expected = max(curve.value_at(p) - gap, 0.0)
        assert math.isclose(capped.value_at(p), expected, rel_tol=0, abs_tol=1e-9)
