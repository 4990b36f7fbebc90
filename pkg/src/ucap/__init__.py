"""Dispatch and adequacy toolkit for heterogeneous energy storage fleets.

Dispatches energy-constrained storage so that energy-not-served during
supply shortfalls is minimised, analyses fleet capability in E-p space,
and quantifies the adequacy contribution of storage through Monte Carlo
LOLE/EENS studies.
"""

from .adequacy import (
    GeneratorClass,
    PolicyAdequacy,
    StudyConfig,
    StudyResult,
    build_margin_trace,
    confidence_interval,
    load_study_config,
    run_adequacy_study,
    simulate_conventional_availability,
)
from .dispatch import (
    DispatchResult,
    explicit_fractions,
    lowest_power_first_step,
    optimal_step,
    peak_shaving_schedule,
    proportion_of_power_step,
    proportional_discharge_step,
    recharge_step,
    z_hat_discharge,
)
from .ep_analysis import (
    EpCurve,
    Infeasibility,
    capacity_curve,
    check_feasibility,
    classify_infeasibility,
    ep_transform,
    max_energy_gap,
    shave_level,
)
from .errors import UcapError
from .fleet import (
    Device,
    Fleet,
    FleetState,
    apply_input,
    read_fleet_csv,
    validate_fleet,
)
from .oracle import FlowInstance, flow_instance, min_ens_oracle
from .signals import (
    StepSignal,
    cap_signal,
    read_trace_csv,
    signal_energy,
    step_signal_from_samples,
    write_trace_csv,
)
from .simulate import (
    RunTrace,
    ShortfallEvent,
    StepRecord,
    ens_of_run,
    run_dispatch,
    segment_events,
)

__version__ = "0.1.0"

__all__ = [
    "Device",
    "DispatchResult",
    "EpCurve",
    "Fleet",
    "FleetState",
    "FlowInstance",
    "GeneratorClass",
    "Infeasibility",
    "PolicyAdequacy",
    "RunTrace",
    "ShortfallEvent",
    "StepRecord",
    "StepSignal",
    "StudyConfig",
    "StudyResult",
    "UcapError",
    "apply_input",
    "build_margin_trace",
    "cap_signal",
    "capacity_curve",
    "check_feasibility",
    "classify_infeasibility",
    "confidence_interval",
    "ens_of_run",
    "ep_transform",
    "explicit_fractions",
    "flow_instance",
    "load_study_config",
    "lowest_power_first_step",
    "max_energy_gap",
    "min_ens_oracle",
    "optimal_step",
    "peak_shaving_schedule",
    "proportion_of_power_step",
    "proportional_discharge_step",
    "read_fleet_csv",
    "read_trace_csv",
    "recharge_step",
    "run_adequacy_study",
    "run_dispatch",
    "segment_events",
    "shave_level",
    "signal_energy",
    "simulate_conventional_availability",
    "step_signal_from_samples",
    "validate_fleet",
    "write_trace_csv",
    "z_hat_discharge",
]
