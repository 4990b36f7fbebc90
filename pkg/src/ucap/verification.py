"""Randomised cross-checks between dispatch, E-p analysis and the oracle.

Three independent routes to the minimum energy-not-served must agree on
every instance: simulating the optimal policy, the max energy gap of the
E-p curves, and the max-flow oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ep_analysis import capacity_curve, ep_transform, max_energy_gap
from .fleet import Device, Fleet, FleetState
from .oracle import min_ens_oracle
from .signals import StepSignal, step_signal_from_samples
from .simulate import ens_of_run, run_dispatch

AGREEMENT_TOL_KWH = 1e-6


@dataclass(frozen=True)
class AgreementReport:
    instances: int
    failures: int
    max_abs_diff_kwh: float
    messages: tuple[str, ...]

    @property
    def passed(self) -> bool:
        return self.failures == 0


def random_instance(
    rng: np.random.Generator, max_devices: int = 4, max_steps: int = 6
) -> tuple[Fleet, FleetState, StepSignal]:
    """Small integer-rated fleet plus request trace, mixing feasible and not."""
    n = int(rng.integers(1, max_devices + 1))
    devices = []
    x = []
    for i in range(n):
        power = int(rng.integers(1, 9))
        cap_h = int(rng.integers(1, 5))
        energy = int(rng.integers(0, power * cap_h + 1))
        devices.append(
            Device(
                id=f"d{i}",
                max_discharge_kw=float(power),
                energy_kwh=float(energy),
                capacity_kwh=float(power * cap_h),
                max_charge_kw=-float(power),
            )
        )
        x.append(energy / power)
    fleet = Fleet(tuple(devices))
    total_power = sum(d.max_discharge_kw for d in devices)
    steps = int(rng.integers(1, max_steps + 1))
    requests = rng.integers(0, int(1.5 * total_power) + 2, steps)
    reference = step_signal_from_samples([float(v) for v in requests], 1.0)
    return fleet, FleetState(tuple(x)), reference


def check_instance(
    fleet: Fleet,
    state: FleetState,
    reference: StepSignal,
    tol_kwh: float = AGREEMENT_TOL_KWH,
) -> tuple[list[str], float]:
    """Compare the three ENS routes on one instance.

    Returns mismatch messages (empty when all agree) and the largest
    absolute pairwise difference.
    """
    ens_sim = ens_of_run(run_dispatch(fleet, state, reference, policy="optimal"))
    ens_gap = max_energy_gap(ep_transform(reference), capacity_curve(fleet, state))
    ens_flow = min_ens_oracle(fleet, state, reference)
    worst = max(
        abs(ens_sim - ens_gap), abs(ens_sim - ens_flow), abs(ens_gap - ens_flow)
    )
    messages = []
    if worst > tol_kwh:
        messages.append(
            f"disagreement: simulated={ens_sim!r} gap={ens_gap!r} "
            f"oracle={ens_flow!r} (worst diff {worst:.3e} kWh)"
        )
    if ens_flow > ens_sim + tol_kwh:
        messages.append(
            f"oracle {ens_flow!r} exceeds simulated optimal {ens_sim!r}"
        )
    return messages, worst


def run_agreement_suite(instances: int = 200, seed: int = 2024) -> AgreementReport:
    """Run the three-way agreement check over seeded random instances."""
    rng = np.random.default_rng(seed)
    failures = 0
    worst = 0.0
    messages: list[str] = []
    for k in range(instances):
        fleet, state, reference = random_instance(rng)
        msgs, diff = check_instance(fleet, state, reference)
        worst = max(worst, diff)
        if msgs:
            failures += 1
            messages.extend(f"instance {k}: {m}" for m in msgs)
    return AgreementReport(instances, failures, worst, tuple(messages))
