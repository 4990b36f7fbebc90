"""Dispatch policies for energy-constrained storage fleets.

All interval policies share one signature: given the state, the fleet, a
power request and an interval length, they return the constant per-device
power to hold across the interval.  The ENS-optimal policy equalises
time-to-go downward to a threshold found from an exact energy balance;
the recharge policy is its mirror image, filling the emptiest devices
first.  Three comparison heuristics (lowest power first, proportion of
power, proportional discharge) are reconstructions of commonly used
alternatives, each bounded per device by the interval-limited maximum
power ``max_discharge_kw * min(x / dt, 1)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from .errors import (
    NegativeRequest,
    PositiveRequest,
    PreconditionViolation,
    StreamingNonCausal,
    UnknownPolicy,
)
from .ep_analysis import capacity_curve, ep_transform, max_energy_gap, shave_level
from .fleet import Fleet, FleetState
from .numeric import bound_tol
from .signals import StepSignal, cap_signal

PEAK_SHAVING = "peak_shaving"


@dataclass(frozen=True)
class DispatchResult:
    """Per-device power for one interval, its total, and the threshold used."""

    u_kw: tuple[float, ...]
    served_kw: float
    z_hat_h: float | None = None


def _check_discharge_args(request_kw: float, dt_h: float) -> None:
    if request_kw < 0:
        raise NegativeRequest(f"discharge request must be >= 0, got {request_kw} kW")
    if dt_h <= 0:
        raise PreconditionViolation(f"dt_h must be > 0, got {dt_h}")


def _deliverable_kwh(
    x: Sequence[float], p: Sequence[float], z: float, dt_h: float
) -> float:
    """Energy the fleet can put out in dt while no device drops below z."""
    return sum(pi * max(min(xi - z, dt_h), 0.0) for xi, pi in zip(x, p))


def z_hat_discharge(
    state: FleetState, fleet: Fleet, request_kw: float, dt_h: float
) -> float:
    """Equalisation threshold for one discharge interval.

    The smallest time-to-go floor such that running every device down to
    it (each limited to dt hours of output) delivers no more than the
    requested energy.  Candidate kink points of the deliverable energy are
    scanned in descending order with linear interpolation in between.
    When even full output cannot exceed the requested energy, the smallest
    candidate is returned, which dispatches everything available.
    """
    _check_discharge_args(request_kw, dt_h)
    x = state.x
    p = fleet.max_discharge_kw
    if len(x) != len(p):
        raise PreconditionViolation(
            f"state has {len(x)} entries for {len(p)} devices"
        )
    if not x:
        return 0.0
    ys = sorted({*x, *(max(xi - dt_h, 0.0) for xi in x)}, reverse=True)
    target = request_kw * dt_h
    e_hi = 0.0
    idx = 0
    while True:
        idx += 1
        e_lo = e_hi
        e_hi = _deliverable_kwh(x, p, ys[idx - 1], dt_h)
        if e_hi >= target or idx == len(ys):
            break
    if e_hi <= target:
        return ys[idx - 1]
    return ys[idx - 2] + (target - e_lo) / (e_hi - e_lo) * (ys[idx - 1] - ys[idx - 2])


def optimal_step(
    state: FleetState, fleet: Fleet, request_kw: float, dt_h: float
) -> DispatchResult:
    """ENS-optimal constant input for one interval.

    Every device above the equalisation threshold discharges just enough
    to land on it (or runs flat out for the interval); devices at or below
    the threshold stay idle.
    """
    z_hat = z_hat_discharge(state, fleet, request_kw, dt_h)
    u = tuple(
        pi * max(min((xi - z_hat) / dt_h, 1.0), 0.0)
        for xi, pi in zip(state.x, fleet.max_discharge_kw)
    )
    return DispatchResult(u_kw=u, served_kw=sum(u), z_hat_h=z_hat)


def explicit_fractions(
    state: FleetState, fleet: Fleet, request_kw: float
) -> tuple[float, ...]:
    """Instantaneous feedback law: fractions of group power by state rank.

    Devices are grouped by equal time-to-go (descending, ties broken by
    index, equality within relative 1e-9).  Groups are switched fully on
    until the cumulative power passes the request, with at most one group
    running fractionally; depleted groups are forced to zero.
    """
    if request_kw < 0:
        raise NegativeRequest(f"discharge request must be >= 0, got {request_kw} kW")
    x = state.x
    p = fleet.max_discharge_kw
    n = len(x)
    order = sorted(range(n), key=lambda i: (-x[i], i))
    u = [0.0] * n
    cum = 0.0
    i = 0
    while i < n:
        head = x[order[i]]
        group = [order[i]]
        i += 1
        while i < n and head - x[order[i]] <= bound_tol(head):
            group.append(order[i])
            i += 1
        group_power = sum(p[j] for j in group)
        if cum + group_power <= request_kw:
            r = 1.0
        elif cum >= request_kw:
            r = 0.0
        else:
            r = (request_kw - cum) / group_power
        if head <= bound_tol(0.0):
            r = 0.0
        for j in group:
            u[j] = r * p[j]
        cum += group_power
    return tuple(u)


def recharge_step(
    state: FleetState,
    fleet: Fleet,
    request_kw: float,
    dt_h: float,
    grid_side: bool = False,
) -> DispatchResult:
    """Fill devices starting from the smallest time-to-go.

    The rise threshold is found from the mirror-image energy balance of
    the discharge policy: candidate kink points are scanned in ascending
    order until the absorbed energy reaches the (non-negative) magnitude
    of the charging request, interpolating in between.  Each device is
    limited by its capacity and by its per-interval charge increment.

    By default the request bounds the increase of *stored* energy; with
    ``grid_side=True`` it bounds the grid-side draw instead, which differs
    when efficiency is below one.
    """
    if request_kw > 0:
        raise PositiveRequest(f"charging request must be <= 0, got {request_kw} kW")
    if dt_h <= 0:
        raise PreconditionViolation(f"dt_h must be > 0, got {dt_h}")
    devices = fleet.devices
    x = state.x
    if len(x) != len(devices):
        raise PreconditionViolation(
            f"state has {len(x)} entries for {len(devices)} devices"
        )
    if not devices:
        return DispatchResult((), 0.0, 0.0)
    z_bar = tuple(
        min(xi - d.efficiency * d.max_charge_kw * dt_h / d.max_discharge_kw,
            d.max_time_to_go_h)
        for xi, d in zip(x, devices)
    )
    weights = tuple(
        d.max_discharge_kw / (d.efficiency if grid_side else 1.0) for d in devices
    )

    def absorbed_kwh(z: float) -> float:
        return sum(
            w * max(min(z, zb) - xi, 0.0) for w, zb, xi in zip(weights, z_bar, x)
        )

    target = -request_kw * dt_h
    ys = sorted({*x, *z_bar})
    e_hi = 0.0
    idx = 0
    while True:
        idx += 1
        e_lo = e_hi
        e_hi = absorbed_kwh(ys[idx - 1])
        if e_hi >= target or idx == len(ys):
            break
    if e_hi <= target:
        z_hat = ys[idx - 1]
    else:
        z_hat = ys[idx - 2] + (target - e_lo) / (e_hi - e_lo) * (
            ys[idx - 1] - ys[idx - 2]
        )
    u = tuple(
        -(d.max_discharge_kw / (d.efficiency * dt_h))
        * max(min(z_hat, zb) - xi, 0.0)
        for d, zb, xi in zip(devices, z_bar, x)
    )
    return DispatchResult(u_kw=u, served_kw=0.0, z_hat_h=z_hat)


def peak_shaving_schedule(
    fleet: Fleet, state: FleetState, reference: StepSignal
) -> tuple[StepSignal, float]:
    """Cap the reference at the level that makes it exactly feasible.

    Returns the capped trace and the energy shaved off, which equals the
    minimum achievable energy-not-served.  Needs the whole reference up
    front (perfect foresight); the capped trace can then be served in full
    by any exact dispatch.
    """
    curve = ep_transform(reference)
    gap = max_energy_gap(curve, capacity_curve(fleet, state))
    if gap <= 0.0:
        return reference, 0.0
    level = shave_level(curve, gap)
    return cap_signal(reference, level), gap


def _interval_caps(
    state: FleetState, fleet: Fleet, dt_h: float
) -> tuple[float, ...]:
    return tuple(
        pi * min(xi / dt_h, 1.0)
        for xi, pi in zip(state.x, fleet.max_discharge_kw)
    )


def lowest_power_first_step(
    state: FleetState, fleet: Fleet, request_kw: float, dt_h: float
) -> DispatchResult:
    """Greedy fill in ascending order of power rating, ties by index."""
    _check_discharge_args(request_kw, dt_h)
    p = fleet.max_discharge_kw
    caps = _interval_caps(state, fleet, dt_h)
    u = [0.0] * len(p)
    residual = request_kw
    for i in sorted(range(len(p)), key=lambda i: (p[i], i)):
        if residual <= 0.0:
            break
        take = min(caps[i], residual)
        u[i] = take
        residual -= take
    return DispatchResult(u_kw=tuple(u), served_kw=sum(u))


def _capped_proportional(
    weights: Sequence[float], caps: Sequence[float], request_kw: float
) -> list[float]:
    """Allocate in proportion to weights, redistributing around caps.

    Each round reallocates the unmet request from scratch over the devices
    not yet at their cap; devices whose share would exceed their cap are
    pinned there and removed.  Terminates after at most n rounds.
    """
    n = len(caps)
    u = [0.0] * n
    pinned_total = 0.0
    active = [i for i in range(n) if caps[i] > 0.0 and weights[i] > 0.0]
    while active:
        residual = request_kw - pinned_total
        if residual <= 0.0:
            break
        scale = residual / sum(weights[i] for i in active)
        over = [i for i in active if weights[i] * scale >= caps[i]]
        if not over:
            for i in active:
                u[i] = weights[i] * scale
            break
        for i in over:
            u[i] = caps[i]
            pinned_total += caps[i]
        over_set = set(over)
        active = [i for i in active if i not in over_set]
    return u


def proportion_of_power_step(
    state: FleetState, fleet: Fleet, request_kw: float, dt_h: float
) -> DispatchResult:
    """Share the request in proportion to power ratings, capped per interval."""
    _check_discharge_args(request_kw, dt_h)
    caps = _interval_caps(state, fleet, dt_h)
    u = _capped_proportional(fleet.max_discharge_kw, caps, request_kw)
    return DispatchResult(u_kw=tuple(u), served_kw=sum(u))


def proportional_discharge_step(
    state: FleetState, fleet: Fleet, request_kw: float, dt_h: float
) -> DispatchResult:
    """Share the request in proportion to stored energy, capped per interval."""
    _check_discharge_args(request_kw, dt_h)
    caps = _interval_caps(state, fleet, dt_h)
    energies = tuple(
        pi * xi for xi, pi in zip(state.x, fleet.max_discharge_kw)
    )
    u = _capped_proportional(energies, caps, request_kw)
    return DispatchResult(u_kw=tuple(u), served_kw=sum(u))


StepFn = Callable[[FleetState, Fleet, float, float], DispatchResult]

DISCHARGE_POLICIES: dict[str, StepFn] = {
    "optimal": optimal_step,
    "lpf": lowest_power_first_step,
    "pop": proportion_of_power_step,
    "pd": proportional_discharge_step,
}

POLICY_NAMES: tuple[str, ...] = (*DISCHARGE_POLICIES, PEAK_SHAVING)


def discharge_step_fn(policy: str) -> StepFn:
    """Resolve a policy name to its per-interval step function.

    Peak shaving has no step form: it needs the full reference up front
    and is therefore rejected in streaming contexts.
    """
    if policy == PEAK_SHAVING:
        raise StreamingNonCausal(
            "peak_shaving needs the full reference and cannot run step by step"
        )
    try:
        return DISCHARGE_POLICIES[policy]
    except KeyError:
        raise UnknownPolicy(
            f"unknown policy {policy!r}; expected one of {', '.join(POLICY_NAMES)}"
        ) from None
