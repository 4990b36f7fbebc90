"""E-p analysis: energy-above-power transforms, capacity curves, energy gaps.

The E-p transform of a trace maps a power level p to the energy the trace
requires above p; it is convex, non-increasing and piecewise linear.  The
capacity curve of a fleet is the transform of the worst staircase trace
the fleet can serve exactly.  The largest excess of a reference transform
over the capacity curve (the *max energy gap*) equals the minimum
energy-not-served achievable for that reference, which makes these curves
a graphical feasibility test.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from enum import Enum

from .errors import GapExceedsEnergy, NegativeSignal, PreconditionViolation
from .fleet import Fleet, FleetState
from .signals import StepSignal

#: Absolute slack used by the dominance test between two curves.
FEASIBILITY_TOL = 1e-9


class Infeasibility(str, Enum):
    """How a reference exceeds fleet capability, if at all."""

    FEASIBLE = "feasible"
    POWER = "power"
    ENERGY = "energy"
    POWER_AND_ENERGY = "power_and_energy"
    HETEROGENEITY = "heterogeneity"


@dataclass(frozen=True)
class EpCurve:
    """Convex, non-increasing piecewise-linear energy-vs-power curve.

    Defined by breakpoints (powers strictly increasing, energies
    non-increasing); linear in between, and identically zero beyond the
    last breakpoint.  The final energy value must be zero.
    """

    powers: tuple[float, ...]
    energies: tuple[float, ...]

    def __post_init__(self) -> None:
        powers = tuple(float(p) for p in self.powers)
        energies = tuple(float(e) for e in self.energies)
        object.__setattr__(self, "powers", powers)
        object.__setattr__(self, "energies", energies)
        if len(powers) != len(energies) or not powers:
            raise ValueError("need equally many powers and energies, at least one")
        if any(p1 <= p0 for p0, p1 in zip(powers, powers[1:])):
            raise ValueError("powers must be strictly increasing")
        if any(e < -1e-9 for e in energies):
            raise ValueError("energies must be non-negative")
        if abs(energies[-1]) > 1e-9:
            raise ValueError("curve must reach zero at its last breakpoint")
        slack = 1e-9 * max(1.0, energies[0])
        if any(e1 > e0 + slack for e0, e1 in zip(energies, energies[1:])):
            raise ValueError("energies must be non-increasing")
        slopes = [
            (e1 - e0) / (p1 - p0)
            for (p0, e0), (p1, e1) in zip(
                zip(powers, energies), zip(powers[1:], energies[1:])
            )
        ]
        if any(s1 < s0 - slack for s0, s1 in zip(slopes, slopes[1:])):
            raise ValueError("curve must be convex (slopes non-decreasing)")

    @property
    def total_energy_kwh(self) -> float:
        """Energy required above zero power, i.e. the curve value at p = 0."""
        return self.value_at(0.0)

    @property
    def peak_kw(self) -> float:
        """Power level at which the curve reaches zero."""
        return self.powers[-1]

    def value_at(self, p_kw: float) -> float:
        """Evaluate the curve at a power level >= 0."""
        if p_kw >= self.powers[-1]:
            return 0.0
        if p_kw <= self.powers[0]:
            return self.energies[0]
        i = bisect_right(self.powers, p_kw) - 1
        p0, p1 = self.powers[i], self.powers[i + 1]
        e0, e1 = self.energies[i], self.energies[i + 1]
        return e0 + (e1 - e0) * (p_kw - p0) / (p1 - p0)


ZERO_CURVE = EpCurve((0.0,), (0.0,))


def ep_transform(signal: StepSignal) -> EpCurve:
    """Exact E-p transform of a non-negative trace.

    Breakpoints sit at zero and at the distinct step values of the trace;
    at each, the energy above that level is summed directly.
    """
    for v in signal.values:
        if v < 0:
            raise NegativeSignal(f"signal value {v} kW is negative")
    if signal.is_zero:
        return ZERO_CURVE
    durations = [t1 - t0 for t0, t1, _ in signal.steps()]
    levels = sorted({0.0, *signal.values})
    energies = tuple(
        sum(d * (v - level) for d, v in zip(durations, signal.values) if v > level)
        for level in levels
    )
    return EpCurve(tuple(levels), energies)


def capacity_curve(fleet: Fleet, state: FleetState) -> EpCurve:
    """E-p transform of the worst trace the fleet can fully serve.

    That trace is the staircase obtained by running every device at full
    power until it empties, so its level at time t is the total power of
    devices with time-to-go above t.
    """
    if len(state.x) != len(fleet.devices):
        raise PreconditionViolation(
            f"state has {len(state.x)} entries for {len(fleet.devices)} devices"
        )
    pairs = [(xi, p) for xi, p in zip(state.x, fleet.max_discharge_kw) if xi > 0]
    if not pairs:
        return ZERO_CURVE
    cut_times = sorted({xi for xi, _ in pairs})
    times = [0.0, *cut_times]
    values = [sum(p for xi, p in pairs if xi > t) for t in times[:-1]]
    staircase = StepSignal(tuple(times), tuple(values))
    return ep_transform(staircase)


def _merged_breakpoints(a: EpCurve, b: EpCurve) -> list[float]:
    return sorted({*a.powers, *b.powers})


def max_energy_gap(reference: EpCurve, capacity: EpCurve) -> float:
    """Largest excess of the reference curve over the capacity curve.

    The difference of two piecewise-linear curves attains its supremum at
    a breakpoint, so evaluating on the merged breakpoint set is exact.
    Returns 0 when the reference is dominated.
    """
    gap = 0.0
    for p in _merged_breakpoints(reference, capacity):
        gap = max(gap, reference.value_at(p) - capacity.value_at(p))
    return gap


def shave_level(reference: EpCurve, gap_kwh: float) -> float:
    """Power level whose energy-above equals the given gap.

    For a zero gap no shaving is needed and the reference peak is
    returned; otherwise the unique crossing of the curve with the gap is
    found by piecewise-linear inversion.
    """
    if gap_kwh < 0:
        raise PreconditionViolation(f"gap must be >= 0, got {gap_kwh}")
    total = reference.energies[0]
    if gap_kwh > total:
        raise GapExceedsEnergy(
            f"gap {gap_kwh} kWh exceeds trace energy {total} kWh"
        )
    if gap_kwh == 0:
        return reference.peak_kw
    for (p0, e0), (p1, e1) in zip(
        zip(reference.powers, reference.energies),
        zip(reference.powers[1:], reference.energies[1:]),
    ):
        if e1 <= gap_kwh <= e0:
            if e0 == e1:
                return p1
            return p0 + (e0 - gap_kwh) * (p1 - p0) / (e0 - e1)
    return reference.powers[0]


def check_feasibility(
    reference: EpCurve, capacity: EpCurve, tol_kwh: float = FEASIBILITY_TOL
) -> bool:
    """True iff the capacity curve dominates the reference curve throughout."""
    return all(
        reference.value_at(p) <= capacity.value_at(p) + tol_kwh
        for p in _merged_breakpoints(reference, capacity)
    )


def classify_infeasibility(
    reference: EpCurve,
    capacity: EpCurve,
    peak_kw: float,
    total_power_kw: float,
    tol: float = FEASIBILITY_TOL,
) -> Infeasibility:
    """Sort an infeasible request into power / energy / heterogeneity causes.

    The power flag is set when the request peak exceeds the total fleet
    power; the energy flag when its total energy exceeds the stored
    energy.  A request that trips neither flag yet still shows a positive
    energy gap is infeasible purely through fleet heterogeneity.
    """
    over_power = peak_kw > total_power_kw + tol * max(1.0, total_power_kw)
    over_energy = reference.value_at(0.0) > capacity.value_at(0.0) + tol * max(
        1.0, capacity.value_at(0.0)
    )
    if over_power and over_energy:
        return Infeasibility.POWER_AND_ENERGY
    if over_power:
        return Infeasibility.POWER
    if over_energy:
        return Infeasibility.ENERGY
    if max_energy_gap(reference, capacity) > tol:
        return Infeasibility.HETEROGENEITY
    return Infeasibility.FEASIBLE
