"""Piecewise-constant power traces: construction, ingestion, capping, energy.

A :class:`StepSignal` holds strictly increasing breakpoint times and one
power value per right-open interval ``[t_k, t_{k+1})``; it is zero outside
its support.  Signals are immutable values.
"""

from __future__ import annotations

import csv
import math
from bisect import bisect_right
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

from .errors import PreconditionViolation, TraceFormat

TRACE_CSV_COLUMNS = ("t_start_h", "power_kw")


@dataclass(frozen=True)
class StepSignal:
    """Right-open piecewise-constant power trace.

    ``times`` has one more entry than ``values``; both empty encodes the
    identically-zero signal.
    """

    times: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        times = tuple(float(t) for t in self.times)
        values = tuple(float(v) for v in self.values)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        if len(times) == 0 and len(values) == 0:
            return
        if len(times) != len(values) + 1:
            raise ValueError(
                f"need len(times) == len(values) + 1, got {len(times)} and {len(values)}"
            )
        if not all(math.isfinite(t) for t in times):
            raise ValueError("breakpoint times must be finite")
        if not all(math.isfinite(v) for v in values):
            raise ValueError("step values must be finite")
        if any(t1 <= t0 for t0, t1 in zip(times, times[1:])):
            raise ValueError("breakpoint times must be strictly increasing")

    @property
    def is_zero(self) -> bool:
        return len(self.values) == 0

    @property
    def start_h(self) -> float:
        return self.times[0] if self.times else 0.0

    @property
    def end_h(self) -> float:
        return self.times[-1] if self.times else 0.0

    @property
    def peak_kw(self) -> float:
        """Largest value taken on the support; 0 for the empty signal."""
        return max(self.values, default=0.0)

    def value_at(self, t_h: float) -> float:
        """Signal value at time t, honouring the right-open convention."""
        if not self.times or t_h < self.times[0] or t_h >= self.times[-1]:
            return 0.0
        return self.values[bisect_right(self.times, t_h) - 1]

    def steps(self) -> Iterator[tuple[float, float, float]]:
        """Yield (t_start, t_end, value) for every interval in order."""
        for t0, t1, v in zip(self.times, self.times[1:], self.values):
            yield t0, t1, v


def step_signal_from_samples(
    samples: Sequence[float], dt_h: float, t0_h: float = 0.0
) -> StepSignal:
    """Build a signal from uniformly spaced samples.

    Adjacent equal values are merged; an empty sample sequence yields the
    zero signal.
    """
    if dt_h <= 0:
        raise PreconditionViolation(f"dt_h must be > 0, got {dt_h}")
    samples = [float(v) for v in samples]
    if not samples:
        return StepSignal((), ())
    times = [t0_h]
    values = []
    for k, v in enumerate(samples):
        end = t0_h + (k + 1) * dt_h
        if values and v == values[-1]:
            times[-1] = end
        else:
            values.append(v)
            times.append(end)
    return StepSignal(tuple(times), tuple(values))


def cap_signal(signal: StepSignal, level_kw: float) -> StepSignal:
    """Pointwise minimum of the signal and a non-negative cap level."""
    if level_kw < 0:
        raise PreconditionViolation(f"cap level must be >= 0, got {level_kw}")
    if signal.is_zero:
        return signal
    return StepSignal(signal.times, tuple(min(v, level_kw) for v in signal.values))


def signal_energy(signal: StepSignal) -> float:
    """Integral of the signal over its support, kWh for kW and hours."""
    return sum(v * (t1 - t0) for t0, t1, v in signal.steps())


def clip_negative(signal: StepSignal) -> StepSignal:
    """Replace negative values with zero (the discharge-request part)."""
    if signal.is_zero or all(v >= 0 for v in signal.values):
        return signal
    return StepSignal(signal.times, tuple(max(v, 0.0) for v in signal.values))


def subdivide_signal(signal: StepSignal, dt_h: float) -> StepSignal:
    """Cut every interval into sub-steps of at most dt hours.

    Values are unchanged; cuts fall at ``t_start + k*dt`` within each
    interval, so existing breakpoints are always preserved.
    """
    if dt_h <= 0:
        raise PreconditionViolation(f"dt_h must be > 0, got {dt_h}")
    if signal.is_zero:
        return signal
    times = []
    values = []
    for t0, t1, v in signal.steps():
        times.append(t0)
        k = 1
        while t0 + k * dt_h < t1 - 1e-12 * max(1.0, abs(t1)):
            times.append(t0 + k * dt_h)
            values.append(v)
            k += 1
        values.append(v)
    times.append(signal.times[-1])
    return StepSignal(tuple(times), tuple(values))


def read_trace_csv(path: str | Path, duration_h: float | None = None) -> StepSignal:
    """Load a trace from CSV with columns ``t_start_h,power_kw``.

    Rows must be sorted by time.  The last interval is closed either by a
    terminal row whose ``power_kw`` field is empty, or by ``duration_h``
    (total trace duration measured from the first row).
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise TraceFormat(f"{path}: empty trace file")
        got = tuple(name.strip() for name in reader.fieldnames)
        if set(got) != set(TRACE_CSV_COLUMNS):
            raise TraceFormat(
                f"{path}: trace header must have columns "
                f"{','.join(TRACE_CSV_COLUMNS)}, got {','.join(got)}"
            )
        times: list[float] = []
        values: list[float] = []
        closed = False
        for lineno, row in enumerate(reader, start=2):
            if closed:
                raise TraceFormat(f"{path}:{lineno}: rows after the terminal row")
            try:
                t = float(row["t_start_h"])
            except (TypeError, ValueError) as exc:
                raise TraceFormat(f"{path}:{lineno}: bad time: {exc}") from exc
            if times and t <= times[-1]:
                raise TraceFormat(f"{path}:{lineno}: times must be strictly increasing")
            raw = (row["power_kw"] or "").strip()
            if raw == "":
                times.append(t)
                closed = True
                continue
            try:
                v = float(raw)
            except ValueError as exc:
                raise TraceFormat(f"{path}:{lineno}: bad power value: {exc}") from exc
            times.append(t)
            values.append(v)
    if not times:
        return StepSignal((), ())
    if not closed:
        if duration_h is None:
            raise TraceFormat(
                f"{path}: last interval is open; add a terminal row with an "
                f"empty power_kw or pass a duration"
            )
        end = times[0] + duration_h
        if end <= times[-1]:
            raise TraceFormat(
                f"{path}: duration {duration_h} h ends at {end} h, before the "
                f"last row at {times[-1]} h"
            )
        times.append(end)
    if len(times) == 1:
        return StepSignal((), ())
    return StepSignal(tuple(times), tuple(values))


def write_trace_csv(path: str | Path, signal: StepSignal) -> None:
    """Write a trace in the canonical CSV schema, with a terminal row."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_CSV_COLUMNS)
        for t0, _t1, v in signal.steps():
            writer.writerow([repr(t0), repr(v)])
        if not signal.is_zero:
            writer.writerow([repr(signal.times[-1]), ""])
