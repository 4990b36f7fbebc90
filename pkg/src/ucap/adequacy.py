"""Monte Carlo generation adequacy engine with storage dispatch.

Samples annual demand, wind and conventional-availability traces, lets the
storage fleet meet every supply shortfall under each configured policy,
and estimates LOLE and EENS with 95% confidence intervals.  All policies
see identical margin traces (paired comparison), and every sampled year
draws from its own substream derived from (seed, year), so results are
bit-reproducible for a fixed seed regardless of worker count.

Units here are MW/MWh; storage fleets read from kW-denominated CSV files
are rescaled on load.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.signal import lfilter

from .dispatch import DISCHARGE_POLICIES, recharge_step
from .errors import (
    ConfigInvalid,
    DegenerateRates,
    LengthMismatch,
    TooFewSamples,
    TraceFormat,
)
from .fleet import Fleet, FleetState, apply_input, read_fleet_csv, scale_fleet, validate_fleet
from .numeric import bound_tol
from .signals import StepSignal, read_trace_csv, step_signal_from_samples

DEFAULT_HOURS_PER_YEAR = 8760
#: An hour counts toward loss of load when its post-storage ENS exceeds this.
LOLE_THRESHOLD_MWH = 1e-6
#: Two-sided 95% normal quantile used for confidence intervals.
Z_95 = 1.96


@dataclass(frozen=True)
class GeneratorClass:
    """A class of identical conventional units with a two-state outage model.

    ``availability`` is the long-run up fraction, ``mtbf_h`` the mean time
    between subsequent failure events; together they fix the mean time to
    failure (availability * mtbf) and mean time to repair (the rest).
    """

    unit_capacity_mw: float
    unit_count: int
    availability: float
    mtbf_h: float

    def __post_init__(self) -> None:
        if not 0 < self.availability < 1:
            raise ConfigInvalid(
                f"availability must lie in (0, 1), got {self.availability}"
            )
        if self.mtbf_h <= 0:
            raise ConfigInvalid(f"mtbf_h must be > 0, got {self.mtbf_h}")
        if self.unit_count < 0:
            raise ConfigInvalid(f"unit_count must be >= 0, got {self.unit_count}")
        if self.unit_capacity_mw <= 0:
            raise ConfigInvalid(
                f"unit_capacity_mw must be > 0, got {self.unit_capacity_mw}"
            )

    @property
    def mttf_h(self) -> float:
        return self.availability * self.mtbf_h

    @property
    def mttr_h(self) -> float:
        return (1.0 - self.availability) * self.mtbf_h


def _two_state_unit_trace(
    rng: np.random.Generator, hours: int, p_fail: float, p_repair: float, p_up: float
) -> np.ndarray:
    """Hourly 0/1 availability of one unit, started from steady state."""
    out = np.empty(hours, dtype=np.float64)
    up = bool(rng.random() < p_up)
    t = 0
    while t < hours:
        sojourn = int(rng.geometric(p_fail if up else p_repair))
        end = min(t + sojourn, hours)
        out[t:end] = 1.0 if up else 0.0
        t = end
        up = not up
    return out


def simulate_conventional_availability(
    classes: Sequence[GeneratorClass], hours: int, rng: np.random.Generator
) -> np.ndarray:
    """Hourly available conventional capacity, MW, over the given horizon.

    Every unit is an independent two-state hourly Markov chain with
    constant failure and repair probabilities 1/MTTF and 1/MTTR, started
    from its stationary distribution.
    """
    for cls in classes:
        if cls.mttf_h < 1.0 or cls.mttr_h < 1.0:
            raise DegenerateRates(
                f"class {cls.unit_capacity_mw} MW: MTTF {cls.mttf_h} h and MTTR "
                f"{cls.mttr_h} h must both be >= 1 h for an hourly chain"
            )
    total = np.zeros(hours, dtype=np.float64)
    for cls in classes:
        p_fail = 1.0 / cls.mttf_h
        p_repair = 1.0 / cls.mttr_h
        for _ in range(cls.unit_count):
            total += cls.unit_capacity_mw * _two_state_unit_trace(
                rng, hours, p_fail, p_repair, cls.availability
            )
    return total


def build_margin_trace(
    conventional_mw: Sequence[float],
    wind_mw: Sequence[float],
    demand_mw: Sequence[float],
    dt_h: float = 1.0,
    t0_h: float = 0.0,
) -> StepSignal:
    """Hourly margin trace: supply minus demand, positive when in surplus."""
    if not (len(conventional_mw) == len(wind_mw) == len(demand_mw)):
        raise LengthMismatch(
            f"trace lengths differ: conventional {len(conventional_mw)}, "
            f"wind {len(wind_mw)}, demand {len(demand_mw)}"
        )
    margin = (
        np.asarray(conventional_mw, dtype=np.float64)
        + np.asarray(wind_mw, dtype=np.float64)
        - np.asarray(demand_mw, dtype=np.float64)
    )
    return step_signal_from_samples(margin, dt_h, t0_h)


def _ar1(rng: np.random.Generator, hours: int, std: float, corr: float) -> np.ndarray:
    """Stationary AR(1) noise with the given marginal std and lag-1 correlation."""
    if std <= 0.0:
        return np.zeros(hours)
    eps = rng.standard_normal(hours)
    if corr <= 0.0:
        return std * eps
    u = std * math.sqrt(1.0 - corr * corr) * eps
    u[0] = std * eps[0]
    return lfilter([1.0], [1.0, -corr], u)


@dataclass(frozen=True)
class SyntheticDemand:
    """Sinusoidal daily/annual demand shape plus AR(1) noise, MW."""

    base_mw: float
    daily_amplitude_mw: float = 0.0
    annual_amplitude_mw: float = 0.0
    noise_std_mw: float = 0.0
    noise_corr: float = 0.0


@dataclass(frozen=True)
class SyntheticWindCf:
    """Mean-reverting capacity-factor process clipped to [0, 1]."""

    mean_cf: float
    cf_std: float = 0.0
    corr: float = 0.0


@dataclass(frozen=True)
class DemandSource:
    """Annual demand traces: a file pool sampled uniformly, or synthetic."""

    pool: tuple[np.ndarray, ...] = ()
    synthetic: SyntheticDemand | None = None

    def sample(self, hours: int, rng: np.random.Generator) -> np.ndarray:
        if self.pool:
            return self.pool[int(rng.integers(len(self.pool)))]
        syn = self.synthetic
        assert syn is not None
        hour_of_day = np.arange(hours, dtype=np.float64) % 24.0
        shape = (
            syn.base_mw
            - syn.daily_amplitude_mw * np.cos(2.0 * np.pi * hour_of_day / 24.0)
            - syn.annual_amplitude_mw
            * np.cos(2.0 * np.pi * np.arange(hours, dtype=np.float64) / hours)
        )
        noise = _ar1(rng, hours, syn.noise_std_mw, syn.noise_corr)
        return np.maximum(shape + noise, 0.0)


@dataclass(frozen=True)
class WindSource:
    """Installed wind capacity with capacity-factor traces or a synthetic model."""

    installed_mw: float
    pool: tuple[np.ndarray, ...] = ()
    synthetic: SyntheticWindCf | None = None

    def sample(self, hours: int, rng: np.random.Generator) -> np.ndarray:
        if self.pool:
            cf = self.pool[int(rng.integers(len(self.pool)))]
        else:
            syn = self.synthetic
            assert syn is not None
            cf = np.clip(
                syn.mean_cf + _ar1(rng, hours, syn.cf_std, syn.corr), 0.0, 1.0
            )
        return self.installed_mw * cf


@dataclass(frozen=True)
class StudyConfig:
    """Inputs of one Monte Carlo adequacy study; fleet ratings in MW."""

    years: int
    seed: int
    fleet: Fleet
    generators: tuple[GeneratorClass, ...]
    demand: DemandSource
    wind: WindSource | None = None
    policies: tuple[str, ...] = ("optimal",)
    hours_per_year: int = DEFAULT_HOURS_PER_YEAR
    dt_h: float = 1.0
    lole_threshold_mwh: float = LOLE_THRESHOLD_MWH

    def validate(self) -> None:
        if self.years < 1:
            raise ConfigInvalid(f"years must be >= 1, got {self.years}")
        if self.hours_per_year < 1:
            raise ConfigInvalid(
                f"hours_per_year must be >= 1, got {self.hours_per_year}"
            )
        if self.dt_h <= 0 or self.dt_h > 1.0:
            raise ConfigInvalid(f"dt_h must lie in (0, 1] hour, got {self.dt_h}")
        n_sub = round(1.0 / self.dt_h)
        if abs(n_sub * self.dt_h - 1.0) > 1e-9:
            raise ConfigInvalid(
                f"dt_h must divide the hourly trace resolution, got {self.dt_h}"
            )
        if not self.policies:
            raise ConfigInvalid("at least one policy is required")
        for name in self.policies:
            if name not in DISCHARGE_POLICIES:
                raise ConfigInvalid(
                    f"policy {name!r} cannot run causally in a study; choose from "
                    f"{', '.join(DISCHARGE_POLICIES)}"
                )
        if len(set(self.policies)) != len(self.policies):
            raise ConfigInvalid("duplicate policy names in study config")
        violations = validate_fleet(self.fleet)
        if violations:
            raise ConfigInvalid("invalid storage fleet: " + "; ".join(violations))
        if self.demand.pool == () and self.demand.synthetic is None:
            raise ConfigInvalid("demand needs a trace pool or synthetic parameters")
        if self.wind is not None and self.wind.pool == () and self.wind.synthetic is None:
            raise ConfigInvalid("wind needs a trace pool or synthetic parameters")
        for k, trace in enumerate(self.demand.pool):
            if len(trace) != self.hours_per_year:
                raise ConfigInvalid(
                    f"demand trace {k} has {len(trace)} hours, expected "
                    f"{self.hours_per_year}"
                )
        if self.wind is not None:
            for k, trace in enumerate(self.wind.pool):
                if len(trace) != self.hours_per_year:
                    raise ConfigInvalid(
                        f"wind trace {k} has {len(trace)} hours, expected "
                        f"{self.hours_per_year}"
                    )


@dataclass(frozen=True)
class PolicyAdequacy:
    """Adequacy metrics for one policy (or the no-storage baseline)."""

    lole_h_per_year: float
    lole_halfwidth_h: float
    eens_mwh_per_year: float
    eens_halfwidth_mwh: float
    shortfall_events: int
    charged_start_fraction: float | None

    def to_dict(self) -> dict:
        return {
            "lole_h_per_year": self.lole_h_per_year,
            "lole_halfwidth_h": self.lole_halfwidth_h,
            "eens_mwh_per_year": self.eens_mwh_per_year,
            "eens_halfwidth_mwh": self.eens_halfwidth_mwh,
            "shortfall_events": self.shortfall_events,
            "charged_start_fraction": self.charged_start_fraction,
        }


@dataclass(frozen=True)
class StudyResult:
    """Per-policy adequacy metrics plus the paired no-storage baseline."""

    years: int
    seed: int
    policies: dict[str, PolicyAdequacy]
    baseline: PolicyAdequacy
    annual_ens_mwh: dict[str, tuple[float, ...]]
    baseline_annual_ens_mwh: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "years": self.years,
            "seed": self.seed,
            "policies": {name: pa.to_dict() for name, pa in self.policies.items()},
            "no_storage": self.baseline.to_dict(),
            "annual_ens_mwh": {
                name: list(vals) for name, vals in self.annual_ens_mwh.items()
            },
            "no_storage_annual_ens_mwh": list(self.baseline_annual_ens_mwh),
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def confidence_interval(samples: Sequence[float]) -> tuple[float, float]:
    """Mean and 95% halfwidth (normal approximation, sample std)."""
    n = len(samples)
    if n < 2:
        raise TooFewSamples(f"need at least 2 samples, got {n}")
    arr = np.asarray(samples, dtype=np.float64)
    return float(arr.mean()), float(Z_95 * arr.std(ddof=1) / math.sqrt(n))


@dataclass(frozen=True)
class _PolicyYearStats:
    ens_mwh: float
    lol_hours: int
    events: int
    charged_events: int


def _is_full(x: tuple[float, ...], x_max: tuple[float, ...]) -> bool:
    return all(abs(xi - xm) <= bound_tol(xm) for xi, xm in zip(x, x_max))


def _dispatch_year(
    margin: np.ndarray,
    fleet: Fleet,
    policy: str,
    dt_h: float,
    threshold_mwh: float,
) -> _PolicyYearStats:
    """Walk one margin trace with the fleet under one discharge policy.

    Hours with surplus margin and a full fleet are skipped in bulk; only
    shortfall and recharge hours invoke the dispatch machinery.
    """
    step_fn = DISCHARGE_POLICIES[policy]
    n_sub = round(1.0 / dt_h)
    state = fleet.initial_state()
    x_max = fleet.max_time_to_go_h
    charge_floor_mw = fleet.total_charge_kw
    hours = len(margin)
    shortfall_hours = np.flatnonzero(margin < 0.0)
    ptr = 0

    ens = 0.0
    lol_hours = 0
    events = 0
    charged_events = 0
    fully = _is_full(state.x, x_max)
    in_event = False
    h = 0
    while h < hours:
        m = float(margin[h])
        if m >= 0.0:
            in_event = False
            if fully:
                while ptr < len(shortfall_hours) and shortfall_hours[ptr] <= h:
                    ptr += 1
                h = int(shortfall_hours[ptr]) if ptr < len(shortfall_hours) else hours
                continue
            if m > 0.0 and charge_floor_mw < 0.0:
                request = -min(m, -charge_floor_mw)
                for _ in range(n_sub):
                    result = recharge_step(state, fleet, request, dt_h)
                    state = apply_input(state, fleet, result.u_kw, dt_h)
                fully = _is_full(state.x, x_max)
            h += 1
            continue
        request = -m
        if not in_event:
            events += 1
            if fully:
                charged_events += 1
            in_event = True
        hour_ens = 0.0
        for _ in range(n_sub):
            result = step_fn(state, fleet, request, dt_h)
            state = apply_input(state, fleet, result.u_kw, dt_h)
            hour_ens += max(request - result.served_kw, 0.0) * dt_h
        fully = _is_full(state.x, x_max)
        ens += hour_ens
        if hour_ens > threshold_mwh:
            lol_hours += 1
        h += 1
    return _PolicyYearStats(ens, lol_hours, events, charged_events)


def _simulate_year(config: StudyConfig, year: int) -> dict[str, _PolicyYearStats]:
    """Sample one year and evaluate every policy on its margin trace.

    Draw order is fixed (demand, wind, conventional) so that the stream
    consumed by a year never depends on the policy list.
    """
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=config.seed, spawn_key=(year,))
    )
    hours = config.hours_per_year
    demand = config.demand.sample(hours, rng)
    wind = config.wind.sample(hours, rng) if config.wind is not None else 0.0
    conventional = simulate_conventional_availability(config.generators, hours, rng)
    margin = conventional + wind - demand

    shortfall = np.maximum(-margin, 0.0)
    out: dict[str, _PolicyYearStats] = {
        "__none__": _PolicyYearStats(
            ens_mwh=float(shortfall.sum()),
            lol_hours=int((shortfall > config.lole_threshold_mwh).sum()),
            events=0,
            charged_events=0,
        )
    }
    for name in config.policies:
        out[name] = _dispatch_year(
            margin, config.fleet, name, config.dt_h, config.lole_threshold_mwh
        )
    return out


def _simulate_block(
    config: StudyConfig, years: Sequence[int]
) -> list[tuple[int, dict[str, _PolicyYearStats]]]:
    return [(year, _simulate_year(config, year)) for year in years]


def run_adequacy_study(config: StudyConfig, workers: int = 1) -> StudyResult:
    """Run the paired Monte Carlo study; deterministic for a fixed seed.

    With ``workers > 1`` the sampled years are split over a process pool;
    per-year substreams and year-ordered aggregation keep the result
    bit-identical to the single-worker run.
    """
    config.validate()
    years = list(range(config.years))
    per_year: list[dict[str, _PolicyYearStats] | None] = [None] * config.years
    if workers <= 1 or config.years == 1:
        for year in years:
            per_year[year] = _simulate_year(config, year)
    else:
        blocks = [list(chunk) for chunk in np.array_split(years, workers) if len(chunk)]
        with ProcessPoolExecutor(max_workers=len(blocks)) as pool:
            for result in pool.map(_simulate_block, [config] * len(blocks), blocks):
                for year, stats in result:
                    per_year[year] = stats

    def summarise(name: str, charged: bool) -> tuple[PolicyAdequacy, tuple[float, ...]]:
        stats = [per_year[y][name] for y in years]
        annual_ens = tuple(s.ens_mwh for s in stats)
        annual_lol = [float(s.lol_hours) for s in stats]
        if config.years >= 2:
            eens, eens_hw = confidence_interval(annual_ens)
            lole, lole_hw = confidence_interval(annual_lol)
        else:
            eens, eens_hw = annual_ens[0], 0.0
            lole, lole_hw = annual_lol[0], 0.0
        total_events = sum(s.events for s in stats)
        fraction: float | None = None
        if charged:
            charged_events = sum(s.charged_events for s in stats)
            fraction = charged_events / total_events if total_events else 1.0
        return (
            PolicyAdequacy(
                lole_h_per_year=lole,
                lole_halfwidth_h=lole_hw,
                eens_mwh_per_year=eens,
                eens_halfwidth_mwh=eens_hw,
                shortfall_events=total_events,
                charged_start_fraction=fraction,
            ),
            annual_ens,
        )

    policies: dict[str, PolicyAdequacy] = {}
    annual: dict[str, tuple[float, ...]] = {}
    for name in config.policies:
        policies[name], annual[name] = summarise(name, charged=True)
    baseline, baseline_annual = summarise("__none__", charged=False)
    return StudyResult(
        years=config.years,
        seed=config.seed,
        policies=policies,
        baseline=baseline,
        annual_ens_mwh=annual,
        baseline_annual_ens_mwh=baseline_annual,
    )


_POLICY_LABELS = {
    "optimal": "Optimal Policy",
    "lpf": "Lowest Power First",
    "pop": "Proportion of Power",
    "pd": "Proportional Discharge",
}


def render_result_table(result: StudyResult) -> str:
    """Human-readable per-policy LOLE/EENS table with 95% intervals."""
    rows = [("Policy", "LOLE (h/y)", "EENS (MWh/y)")]
    entries = [*result.policies.items(), ("No Storage", result.baseline)]
    for name, pa in entries:
        rows.append(
            (
                _POLICY_LABELS.get(name, name),
                f"{pa.lole_h_per_year:.3f} ± {pa.lole_halfwidth_h:.3f}",
                f"{pa.eens_mwh_per_year:.1f} ± {pa.eens_halfwidth_mwh:.1f}",
            )
        )
    widths = [max(len(row[c]) for row in rows) for c in range(3)]
    lines = [
        "  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip()
        for row in rows
    ]
    charged = [
        f"{name}: {pa.charged_start_fraction:.1%}"
        for name, pa in result.policies.items()
        if pa.charged_start_fraction is not None
    ]
    if charged:
        lines.append("")
        lines.append("Shortfall events starting fully charged: " + ", ".join(charged))
    return "\n".join(lines)


def _load_trace_pool(directory: Path, hours: int) -> tuple[np.ndarray, ...]:
    """Read every CSV in a directory as one hourly annual trace."""
    files = sorted(directory.glob("*.csv"))
    if not files:
        raise ConfigInvalid(f"{directory}: no CSV traces found")
    pool = []
    for path in files:
        signal = read_trace_csv(path, duration_h=float(hours))
        times = signal.times
        if len(times) < 2 or times[0] != 0.0:
            raise TraceFormat(f"{path}: trace must start at hour 0")
        values = np.empty(hours, dtype=np.float64)
        for t0, t1, v in signal.steps():
            lo = int(round(t0))
            hi = int(round(t1))
            if abs(t0 - lo) > 1e-9 or abs(t1 - hi) > 1e-9:
                raise TraceFormat(f"{path}: breakpoints must fall on whole hours")
            values[lo:hi] = v
        if signal.end_h != float(hours):
            raise TraceFormat(
                f"{path}: trace covers {signal.end_h} h, expected {hours}"
            )
        pool.append(values)
    return tuple(pool)


def load_study_config(path: str | Path) -> StudyConfig:
    """Parse a study config JSON document; paths resolve against its folder.

    Schema (see README for the full description)::

        {
          "years": 1000, "seed": 42,
          "hours_per_year": 8760, "dt_hours": 1.0,
          "policies": ["optimal", "lpf", "pop", "pd"],
          "fleet": {"file": "fleet.csv", "power_unit": "kw"},
          "generators": [
            {"unit_capacity_mw": 200, "unit_count": 10,
             "availability": 0.9, "mtbf_hours": 2000}
          ],
          "demand": {"files": "demand/"} | {"synthetic": {...}},
          "wind": null | {"installed_mw": 500, "files": "wind_cf/"}
                       | {"installed_mw": 500, "synthetic": {...}}
        }
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigInvalid(f"{path}: top-level JSON object required")
    base = path.parent

    def require(key: str):
        if key not in raw:
            raise ConfigInvalid(f"{path}: missing required key {key!r}")
        return raw[key]

    hours = int(raw.get("hours_per_year", DEFAULT_HOURS_PER_YEAR))

    fleet_cfg = require("fleet")
    if not isinstance(fleet_cfg, dict) or "file" not in fleet_cfg:
        raise ConfigInvalid(f"{path}: fleet must be an object with a 'file' key")
    fleet = read_fleet_csv(base / fleet_cfg["file"])
    unit = fleet_cfg.get("power_unit", "kw")
    if unit == "kw":
        fleet = scale_fleet(fleet, 1e-3)
    elif unit != "mw":
        raise ConfigInvalid(f"{path}: fleet power_unit must be 'kw' or 'mw'")

    generators = []
    for k, g in enumerate(require("generators")):
        try:
            generators.append(
                GeneratorClass(
                    unit_capacity_mw=float(g["unit_capacity_mw"]),
                    unit_count=int(g["unit_count"]),
                    availability=float(g["availability"]),
                    mtbf_h=float(g["mtbf_hours"]),
                )
            )
        except KeyError as exc:
            raise ConfigInvalid(f"{path}: generators[{k}] missing key {exc}") from exc

    demand_cfg = require("demand")
    if "files" in demand_cfg:
        demand = DemandSource(pool=_load_trace_pool(base / demand_cfg["files"], hours))
    elif "synthetic" in demand_cfg:
        demand = DemandSource(synthetic=SyntheticDemand(**demand_cfg["synthetic"]))
    else:
        raise ConfigInvalid(f"{path}: demand needs 'files' or 'synthetic'")

    wind = None
    wind_cfg = raw.get("wind")
    if wind_cfg is not None:
        if "installed_mw" not in wind_cfg:
            raise ConfigInvalid(f"{path}: wind needs 'installed_mw'")
        if "files" in wind_cfg:
            wind = WindSource(
                installed_mw=float(wind_cfg["installed_mw"]),
                pool=_load_trace_pool(base / wind_cfg["files"], hours),
            )
        elif "synthetic" in wind_cfg:
            wind = WindSource(
                installed_mw=float(wind_cfg["installed_mw"]),
                synthetic=SyntheticWindCf(**wind_cfg["synthetic"]),
            )
        else:
            raise ConfigInvalid(f"{path}: wind needs 'files' or 'synthetic'")

    config = StudyConfig(
        years=int(require("years")),
        seed=int(require("seed")),
        fleet=fleet,
        generators=tuple(generators),
        demand=demand,
        wind=wind,
        policies=tuple(raw.get("policies", ("optimal",))),
        hours_per_year=hours,
        dt_h=float(raw.get("dt_hours", 1.0)),
        lole_threshold_mwh=float(raw.get("lole_threshold_mwh", LOLE_THRESHOLD_MWH)),
    )
    config.validate()
    return config


def override_config(
    config: StudyConfig, years: int | None = None, seed: int | None = None
) -> StudyConfig:
    """Return a copy with years and/or seed replaced (CLI overrides)."""
    updates = {}
    if years is not None:
        updates["years"] = years
    if seed is not None:
        updates["seed"] = seed
    return replace(config, **updates) if updates else config
