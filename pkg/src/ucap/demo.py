"""Built-in four-device demonstration case.

Four devices rated (8 kWh, 2 kW), (12 kWh, 4 kW), (6 kWh, 3 kW) and
(7 kWh, 7 kW) meet a four-hour request of [4, 18, 12, 1] kW; the optimal
dispatch leaves exactly 5 kWh unserved.
"""

from __future__ import annotations

from .fleet import Device, Fleet
from .signals import StepSignal, step_signal_from_samples
from .simulate import RunTrace, run_dispatch


def demo_fleet() -> Fleet:
    return Fleet(
        (
            Device("d1", max_discharge_kw=2.0, energy_kwh=8.0, capacity_kwh=8.0,
                   max_charge_kw=-2.0),
            Device("d2", max_discharge_kw=4.0, energy_kwh=12.0, capacity_kwh=12.0,
                   max_charge_kw=-4.0),
            Device("d3", max_discharge_kw=3.0, energy_kwh=6.0, capacity_kwh=6.0,
                   max_charge_kw=-3.0),
            Device("d4", max_discharge_kw=7.0, energy_kwh=7.0, capacity_kwh=7.0,
                   max_charge_kw=-7.0),
        )
    )


def demo_reference() -> StepSignal:
    return step_signal_from_samples([4.0, 18.0, 12.0, 1.0], dt_h=1.0)


def run_demo(policy: str = "optimal") -> RunTrace:
    fleet = demo_fleet()
    return run_dispatch(fleet, fleet.initial_state(), demo_reference(), policy=policy)


def format_demo_table(trace: RunTrace, fleet: Fleet) -> str:
    """Step-by-step table: request, states, threshold, inputs, and ENS."""
    steps = list(range(1, len(trace.records) + 1))
    rows: list[tuple[str, list[float]]] = []
    rows.append(("request_kw", [rec.request_kw for rec in trace.records]))
    starts = [trace.initial_x, *(rec.x_after_h for rec in trace.records[:-1])]
    for i, dev_id in enumerate(fleet.ids):
        rows.append((f"x_{dev_id}_h", [x[i] for x in starts]))
    rows.append(
        ("z_hat_h", [rec.z_hat_h if rec.z_hat_h is not None else float("nan")
                     for rec in trace.records])
    )
    for i, dev_id in enumerate(fleet.ids):
        rows.append((f"u_{dev_id}_kw", [rec.u_kw[i] for rec in trace.records]))
    rows.append(("ens_kwh", [rec.ens_kwh for rec in trace.records]))

    name_width = max(len(name) for name, _ in rows)
    lines = [
        "step".ljust(name_width)
        + "".join(f"{s:>9d}" for s in steps)
    ]
    for name, values in rows:
        lines.append(
            name.ljust(name_width) + "".join(f"{v:>9.2f}" for v in values)
        )
    lines.append(f"total ENS: {trace.total_ens_kwh:g} kWh")
    return "\n".join(lines)
