"""Exact minimum-ENS oracle via max-flow on a transportation graph.

Each device is a node fed from the source by its stored energy; each
positive request interval is a node draining to the sink by its energy
demand; a device-interval edge carries at most the device power times the
interval length.  The maximum flow is the most energy any dispatch could
deliver, so the demand left over is the minimum energy-not-served.

Deliberately independent of the dispatch module: flows are solved on
exact rationals so results can cross-check the policies to round-off.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction

from .fleet import Fleet, FleetState
from .signals import StepSignal


@dataclass(frozen=True)
class FlowInstance:
    """Bipartite device/interval capacities, all in exact kWh."""

    device_energy_kwh: tuple[Fraction, ...]
    interval_demand_kwh: tuple[Fraction, ...]
    device_interval_cap_kwh: tuple[tuple[Fraction, ...], ...]


def flow_instance(
    fleet: Fleet, state: FleetState, reference: StepSignal
) -> FlowInstance:
    """Build the transportation instance for the positive part of a trace."""
    powers = [Fraction(p) for p in fleet.max_discharge_kw]
    energies = tuple(
        Fraction(p) * Fraction(xi) for p, xi in zip(fleet.max_discharge_kw, state.x)
    )
    intervals = [
        (Fraction(t1) - Fraction(t0), Fraction(v))
        for t0, t1, v in reference.steps()
        if v > 0
    ]
    demands = tuple(d * v for d, v in intervals)
    links = tuple(tuple(p * d for d, _ in intervals) for p in powers)
    return FlowInstance(energies, demands, links)


def _max_flow(instance: FlowInstance) -> Fraction:
    """Edmonds-Karp on the dense device/interval graph, exact arithmetic."""
    n = len(instance.device_energy_kwh)
    m = len(instance.interval_demand_kwh)
    size = n + m + 2
    source, sink = 0, size - 1
    cap = [[Fraction(0)] * size for _ in range(size)]
    for i, e in enumerate(instance.device_energy_kwh):
        cap[source][1 + i] = e
    for k, d in enumerate(instance.interval_demand_kwh):
        cap[1 + n + k][sink] = d
    for i, row in enumerate(instance.device_interval_cap_kwh):
        for k, c in enumerate(row):
            cap[1 + i][1 + n + k] = c

    total = Fraction(0)
    while True:
        parent = [-1] * size
        parent[source] = source
        queue = deque([source])
        while queue and parent[sink] == -1:
            v = queue.popleft()
            for w in range(size):
                if parent[w] == -1 and cap[v][w] > 0:
                    parent[w] = v
                    queue.append(w)
        if parent[sink] == -1:
            return total
        bottleneck = None
        w = sink
        while w != source:
            v = parent[w]
            bottleneck = cap[v][w] if bottleneck is None else min(bottleneck, cap[v][w])
            w = v
        w = sink
        while w != source:
            v = parent[w]
            cap[v][w] -= bottleneck
            cap[w][v] += bottleneck
            w = v
        total += bottleneck


def min_ens_oracle(fleet: Fleet, state: FleetState, reference: StepSignal) -> float:
    """Minimum achievable energy-not-served for a piecewise-constant trace.

    Exact for inputs that are binary rationals (all floats are); assumes
    discharge only, so negative trace values contribute nothing.
    """
    instance = flow_instance(fleet, state, reference)
    demand = sum(instance.interval_demand_kwh, Fraction(0))
    return float(demand - _max_flow(instance))
