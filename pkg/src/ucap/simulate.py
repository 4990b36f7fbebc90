"""Step a fleet through a reference trace, account ENS, segment events.

Requests are signed within one trace: positive values are supply
shortfalls to discharge into, negative values are surplus available for
charging, zero leaves the fleet idle.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from .dispatch import (
    PEAK_SHAVING,
    POLICY_NAMES,
    discharge_step_fn,
    recharge_step,
)
from .ep_analysis import capacity_curve, ep_transform, max_energy_gap, shave_level
from .errors import UnknownPolicy
from .fleet import Fleet, FleetState, apply_input
from .numeric import bound_tol
from .signals import StepSignal, clip_negative, subdivide_signal


@dataclass(frozen=True)
class StepRecord:
    """One dispatch interval: request, total served, inputs, state after."""

    t_start_h: float
    t_end_h: float
    request_kw: float
    served_kw: float
    u_kw: tuple[float, ...]
    x_after_h: tuple[float, ...]
    z_hat_h: float | None = None

    @property
    def dt_h(self) -> float:
        return self.t_end_h - self.t_start_h

    @property
    def ens_kwh(self) -> float:
        return max(self.request_kw - self.served_kw, 0.0) * self.dt_h


@dataclass(frozen=True)
class RunTrace:
    """Full record of one dispatch run."""

    initial_x: tuple[float, ...]
    records: tuple[StepRecord, ...]

    @property
    def total_ens_kwh(self) -> float:
        return sum(rec.ens_kwh for rec in self.records)

    @property
    def total_served_kwh(self) -> float:
        return sum(rec.served_kw * rec.dt_h for rec in self.records)

    def cumulative_ens_kwh(self) -> tuple[float, ...]:
        """Running ENS total after each step."""
        out = []
        acc = 0.0
        for rec in self.records:
            acc += rec.ens_kwh
            out.append(acc)
        return tuple(out)


@dataclass(frozen=True)
class ShortfallEvent:
    """A maximal run of steps with positive requests."""

    start_index: int
    end_index: int
    ens_kwh: float
    fully_charged_at_start: bool


def run_dispatch(
    fleet: Fleet,
    initial_state: FleetState,
    reference: StepSignal,
    policy: str = "optimal",
    recharge: bool = False,
    dt_h: float | None = None,
) -> RunTrace:
    """Dispatch the fleet over every interval of a piecewise-constant trace.

    Positive requests go to the named discharge policy, negative requests
    to the recharge policy when enabled (idle otherwise), and zero leaves
    the state unchanged.  If ``dt_h`` is given the trace is first cut into
    sub-steps of at most that length.  ``peak_shaving`` caps the positive
    part of the trace at the exact-feasibility level for the initial state
    and serves the capped request with the optimal policy; ENS is still
    accounted against the original request.
    """
    if policy not in POLICY_NAMES:
        raise UnknownPolicy(
            f"unknown policy {policy!r}; expected one of {', '.join(POLICY_NAMES)}"
        )
    signal = subdivide_signal(reference, dt_h) if dt_h is not None else reference
    cap_level: float | None = None
    if policy == PEAK_SHAVING:
        curve = ep_transform(clip_negative(signal))
        gap = max_energy_gap(curve, capacity_curve(fleet, initial_state))
        if gap > 0.0:
            cap_level = shave_level(curve, gap)
        step_fn = discharge_step_fn("optimal")
    else:
        step_fn = discharge_step_fn(policy)

    state = initial_state
    n = len(fleet)
    records = []
    for t0, t1, request in signal.steps():
        dt = t1 - t0
        z_hat = None
        if request > 0:
            target = request if cap_level is None else min(request, cap_level)
            result = step_fn(state, fleet, target, dt)
            u, served, z_hat = result.u_kw, result.served_kw, result.z_hat_h
        elif request < 0 and recharge:
            result = recharge_step(state, fleet, request, dt)
            u, served, z_hat = result.u_kw, 0.0, result.z_hat_h
        else:
            u, served = (0.0,) * n, 0.0
        state = apply_input(state, fleet, u, dt)
        records.append(
            StepRecord(t0, t1, request, served, u, state.x, z_hat)
        )
    return RunTrace(initial_x=initial_state.x, records=tuple(records))


def ens_of_run(trace: RunTrace) -> float:
    """Total energy-not-served over the run, kWh."""
    return trace.total_ens_kwh


def segment_events(trace: RunTrace, fleet: Fleet) -> list[ShortfallEvent]:
    """Split the run into maximal contiguous runs of positive requests."""
    x_max = fleet.max_time_to_go_h
    events: list[ShortfallEvent] = []
    start: int | None = None
    ens = 0.0
    charged = False
    prev_x = trace.initial_x
    for k, rec in enumerate(trace.records):
        if rec.request_kw > 0:
            if start is None:
                start = k
                ens = 0.0
                charged = all(
                    abs(xi - xm) <= bound_tol(xm) for xi, xm in zip(prev_x, x_max)
                )
            ens += rec.ens_kwh
        elif start is not None:
            events.append(ShortfallEvent(start, k, ens, charged))
            start = None
        prev_x = rec.x_after_h
    if start is not None:
        events.append(ShortfallEvent(start, len(trace.records), ens, charged))
    return events


def write_run_trace_csv(path: str | Path, trace: RunTrace, fleet: Fleet) -> None:
    """Emit a run as CSV with per-device input and state columns."""
    path = Path(path)
    header = [
        "t",
        "request_kw",
        "served_kw",
        "ens_kwh",
        *(f"u_{dev_id}" for dev_id in fleet.ids),
        *(f"x_{dev_id}" for dev_id in fleet.ids),
    ]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for rec in trace.records:
            writer.writerow(
                [
                    repr(rec.t_start_h),
                    repr(rec.request_kw),
                    repr(rec.served_kw),
                    repr(rec.ens_kwh),
                    *(repr(v) for v in rec.u_kw),
                    *(repr(v) for v in rec.x_after_h),
                ]
            )
