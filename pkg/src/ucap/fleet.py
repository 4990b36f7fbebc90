"""Storage device and fleet model: ratings, state and state-update dynamics.

Power is in kW with discharging positive and charging negative.  Device
state is carried as *time-to-go*: stored extractable energy divided by the
maximum discharge power, in hours.  Energy views are derived from it.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ConfigInvalid, PreconditionViolation
from .numeric import bound_tol

FLEET_CSV_COLUMNS = (
    "id",
    "max_discharge_kw",
    "energy_kwh",
    "capacity_kwh",
    "max_charge_kw",
    "efficiency",
)


@dataclass(frozen=True)
class Device:
    """A single storage unit.

    Attributes:
        id: unique identifier within a fleet.
        max_discharge_kw: maximum discharge power, > 0.
        energy_kwh: initially stored extractable energy, in [0, capacity_kwh].
        capacity_kwh: maximum extractable energy, >= energy_kwh.
        max_charge_kw: maximum charging power, <= 0 by sign convention.
        efficiency: combined charge/discharge efficiency, in (0, 1].

    Construction never validates; see :func:`validate_fleet`.
    """

    id: str
    max_discharge_kw: float
    energy_kwh: float
    capacity_kwh: float
    max_charge_kw: float = 0.0
    efficiency: float = 1.0

    @property
    def time_to_go_h(self) -> float:
        """Initial time-to-go in hours."""
        return self.energy_kwh / self.max_discharge_kw

    @property
    def max_time_to_go_h(self) -> float:
        """Time-to-go of the device when completely full, in hours."""
        return self.capacity_kwh / self.max_discharge_kw


@dataclass(frozen=True)
class Fleet:
    """An ordered collection of devices; the order is the canonical index order."""

    devices: tuple[Device, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "devices", tuple(self.devices))

    def __len__(self) -> int:
        return len(self.devices)

    def __iter__(self):
        return iter(self.devices)

    @cached_property
    def ids(self) -> tuple[str, ...]:
        return tuple(d.id for d in self.devices)

    @cached_property
    def max_discharge_kw(self) -> tuple[float, ...]:
        return tuple(d.max_discharge_kw for d in self.devices)

    @cached_property
    def max_time_to_go_h(self) -> tuple[float, ...]:
        return tuple(d.max_time_to_go_h for d in self.devices)

    @cached_property
    def total_discharge_kw(self) -> float:
        return sum(d.max_discharge_kw for d in self.devices)

    @cached_property
    def total_charge_kw(self) -> float:
        """Aggregate charging rating; non-positive by sign convention."""
        return sum(d.max_charge_kw for d in self.devices)

    def initial_state(self) -> FleetState:
        """State implied by the declared initial energies."""
        return FleetState(tuple(d.time_to_go_h for d in self.devices))

    def full_state(self) -> FleetState:
        """State with every device at capacity."""
        return FleetState(self.max_time_to_go_h)


@dataclass(frozen=True)
class FleetState:
    """Per-device time-to-go vector, hours; one entry per fleet device."""

    x: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))

    def __len__(self) -> int:
        return len(self.x)

    def energy_kwh(self, fleet: Fleet) -> float:
        """Total stored extractable energy under the given ratings."""
        return sum(p * xi for p, xi in zip(fleet.max_discharge_kw, self.x))


def validate_fleet(fleet: Fleet) -> list[str]:
    """Collect invariant violations; empty list means the fleet is valid.

    Never raises: one entry per violated invariant, naming the device id
    and the offending field.
    """
    violations: list[str] = []
    seen: dict[str, int] = {}
    for idx, dev in enumerate(fleet.devices):
        if dev.id in seen:
            violations.append(
                f"device {dev.id!r}: id duplicates device at index {seen[dev.id]}"
            )
        else:
            seen[dev.id] = idx
        if not (math.isfinite(dev.max_discharge_kw) and dev.max_discharge_kw > 0):
            violations.append(
                f"device {dev.id!r}: max_discharge_kw must be finite and > 0, "
                f"got {dev.max_discharge_kw}"
            )
        if not (math.isfinite(dev.energy_kwh) and dev.energy_kwh >= 0):
            violations.append(
                f"device {dev.id!r}: energy_kwh must be finite and >= 0, "
                f"got {dev.energy_kwh}"
            )
        if not (math.isfinite(dev.capacity_kwh) and dev.capacity_kwh >= dev.energy_kwh):
            violations.append(
                f"device {dev.id!r}: capacity_kwh must be finite and >= energy_kwh, "
                f"got {dev.capacity_kwh}"
            )
        if not (math.isfinite(dev.max_charge_kw) and dev.max_charge_kw <= 0):
            violations.append(
                f"device {dev.id!r}: max_charge_kw must be finite and <= 0 "
                f"(charging is negative), got {dev.max_charge_kw}"
            )
        if not (math.isfinite(dev.efficiency) and 0 < dev.efficiency <= 1):
            violations.append(
                f"device {dev.id!r}: efficiency must lie in (0, 1], got {dev.efficiency}"
            )
    return violations


def apply_input(state: FleetState, fleet: Fleet, u_kw: Sequence[float], dt_h: float) -> FleetState:
    """Advance the fleet state by one interval of constant per-device power.

    Discharge components must respect the interval-limited maximum
    ``max_discharge_kw * min(x / dt, 1)``; charge components must respect
    the charging rating and must not overfill the device (charging
    efficiency applies to stored energy).  Bounds are checked to the
    package tolerance and round-off near 0 or the capacity is absorbed.

    Raises:
        PreconditionViolation: if any bound is exceeded beyond tolerance,
            which signals a buggy policy rather than a modelling state.
    """
    if dt_h <= 0:
        raise PreconditionViolation(f"dt_h must be > 0, got {dt_h}")
    if len(u_kw) != len(fleet.devices) or len(state.x) != len(fleet.devices):
        raise PreconditionViolation(
            f"length mismatch: {len(state.x)} states, {len(u_kw)} inputs, "
            f"{len(fleet.devices)} devices"
        )
    new_x = []
    for dev, xi, ui in zip(fleet.devices, state.x, u_kw):
        x_max = dev.max_time_to_go_h
        charging = ui < 0
        if charging:
            if ui < dev.max_charge_kw - bound_tol(dev.max_charge_kw):
                raise PreconditionViolation(
                    f"device {dev.id!r}: charge {ui} kW exceeds rating "
                    f"{dev.max_charge_kw} kW"
                )
            dx = -dev.efficiency * ui * dt_h / dev.max_discharge_kw
        else:
            cap = dev.max_discharge_kw * min(xi / dt_h, 1.0)
            if ui > cap + bound_tol(cap):
                raise PreconditionViolation(
                    f"device {dev.id!r}: discharge {ui} kW exceeds interval "
                    f"limit {cap} kW"
                )
            dx = -ui * dt_h / dev.max_discharge_kw
        xn = xi + dx
        if xn < -bound_tol(0.0) or xn > x_max + bound_tol(x_max):
            raise PreconditionViolation(
                f"device {dev.id!r}: state {xn} h leaves [0, {x_max}] h"
            )
        if xn < 0.0:
            xn = 0.0
        elif xn > x_max:
            xn = x_max
        elif charging and xn >= x_max - bound_tol(x_max):
            # a charge aimed at the capacity bound lands on it exactly
            xn = x_max
        new_x.append(xn)
    return FleetState(tuple(new_x))


def read_fleet_csv(path: str | Path) -> Fleet:
    """Load a fleet from CSV with the canonical column set.

    The header must contain exactly the columns
    ``id,max_discharge_kw,energy_kwh,capacity_kwh,max_charge_kw,efficiency``;
    missing or unknown columns are rejected.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ConfigInvalid(f"{path}: empty fleet file")
        got = tuple(name.strip() for name in reader.fieldnames)
        if set(got) != set(FLEET_CSV_COLUMNS):
            raise ConfigInvalid(
                f"{path}: fleet header must have columns "
                f"{','.join(FLEET_CSV_COLUMNS)}, got {','.join(got)}"
            )
        devices = []
        for lineno, row in enumerate(reader, start=2):
            try:
                devices.append(
                    Device(
                        id=row["id"].strip(),
                        max_discharge_kw=float(row["max_discharge_kw"]),
                        energy_kwh=float(row["energy_kwh"]),
                        capacity_kwh=float(row["capacity_kwh"]),
                        max_charge_kw=float(row["max_charge_kw"]),
                        efficiency=float(row["efficiency"]),
                    )
                )
            except (TypeError, ValueError) as exc:
                raise ConfigInvalid(f"{path}:{lineno}: bad device row: {exc}") from exc
    return Fleet(tuple(devices))


def scale_fleet(fleet: Fleet, power_factor: float) -> Fleet:
    """Rescale all power and energy ratings by a common factor (unit change)."""
    return Fleet(
        tuple(
            Device(
                id=d.id,
                max_discharge_kw=d.max_discharge_kw * power_factor,
                energy_kwh=d.energy_kwh * power_factor,
                capacity_kwh=d.capacity_kwh * power_factor,
                max_charge_kw=d.max_charge_kw * power_factor,
                efficiency=d.efficiency,
            )
            for d in fleet.devices
        )
    )
