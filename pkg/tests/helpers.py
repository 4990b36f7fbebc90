"""Shared builders and hypothesis strategies for the test suite."""

from __future__ import annotations

import hypothesis.strategies as st

from ucap.adequacy import (
    DemandSource,
    GeneratorClass,
    StudyConfig,
    SyntheticDemand,
    SyntheticWindCf,
    WindSource,
)
from ucap.fleet import Device, Fleet, FleetState
from ucap.signals import step_signal_from_samples


@st.composite
def fleets_with_state(draw, max_devices: int = 5, allow_empty_devices: bool = True):
    """A small well-formed fleet plus a consistent state within bounds."""
    n = draw(st.integers(1, max_devices))
    devices = []
    xs = []
    for i in range(n):
        power = draw(st.floats(0.5, 8.0))
        x_max = draw(st.floats(0.25, 5.0))
        frac = draw(st.floats(0.0, 1.0)) if allow_empty_devices else draw(
            st.floats(0.05, 1.0)
        )
        x0 = x_max * frac
        devices.append(
            Device(
                id=f"d{i}",
                max_discharge_kw=power,
                energy_kwh=power * x0,
                capacity_kwh=power * x_max,
                max_charge_kw=-draw(st.floats(0.1, 6.0)),
                efficiency=draw(st.floats(0.5, 1.0)),
            )
        )
        xs.append(x0)
    return Fleet(tuple(devices)), FleetState(tuple(xs))


@st.composite
def nonnegative_signals(draw, max_steps: int = 6, max_power: float = 30.0):
    k = draw(st.integers(0, max_steps))
    values = [draw(st.floats(0.0, max_power)) for _ in range(k)]
    dt = draw(st.sampled_from([0.25, 0.5, 1.0]))
    return step_signal_from_samples(values, dt)


def synthetic_study_config(
    years: int = 100,
    seed: int = 42,
    policies: tuple[str, ...] = ("optimal", "lpf", "pop", "pd"),
) -> StudyConfig:
    """Three-class synthetic system with a heterogeneous MW-scale fleet."""
    fleet = Fleet(
        (
            Device("s1", 60.0, 120.0, 120.0, -120.0),
            Device("s2", 40.0, 40.0, 40.0, -80.0),
            Device("s3", 25.0, 100.0, 100.0, -50.0),
            Device("s4", 80.0, 80.0, 80.0, -160.0),
        )
    )
    return StudyConfig(
        years=years,
        seed=seed,
        fleet=fleet,
        generators=(
            GeneratorClass(200.0, 12, 0.90, 2000.0),
            GeneratorClass(100.0, 10, 0.95, 1500.0),
            GeneratorClass(50.0, 12, 0.92, 1000.0),
        ),
        demand=DemandSource(
            synthetic=SyntheticDemand(
                base_mw=2650.0,
                daily_amplitude_mw=250.0,
                annual_amplitude_mw=150.0,
                noise_std_mw=100.0,
                noise_corr=0.8,
            )
        ),
        wind=WindSource(
            installed_mw=300.0,
            synthetic=SyntheticWindCf(mean_cf=0.3, cf_std=0.15, corr=0.95),
        ),
        policies=policies,
    )
