"""Command-line entry point: dispatch runs, E-p analysis, adequacy studies.

Exit codes: 0 on success, 1 on validation or usage errors, 2 on unexpected
runtime errors.  Set the ``UCAP_LOG`` environment variable to a logging
level name to see progress messages.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .adequacy import (
    load_study_config,
    override_config,
    render_result_table,
    run_adequacy_study,
)
from .demo import demo_fleet, format_demo_table, run_demo
from .dispatch import POLICY_NAMES
from .ep_analysis import (
    EpCurve,
    capacity_curve,
    classify_infeasibility,
    ep_transform,
    max_energy_gap,
    shave_level,
)
from .errors import ConfigInvalid, UcapError
from .fleet import read_fleet_csv, validate_fleet
from .signals import read_trace_csv
from .simulate import ens_of_run, run_dispatch, segment_events, write_run_trace_csv
from .verification import run_agreement_suite

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    """Argument parser that exits with status 1 on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _load_fleet(path: str):
    fleet = read_fleet_csv(path)
    violations = validate_fleet(fleet)
    if violations:
        raise ConfigInvalid(f"{path}: " + "; ".join(violations))
    return fleet


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_curve_csv(path: Path, curve: EpCurve) -> None:
    with path.open("w") as fh:
        fh.write("p_kw,energy_kwh\n")
        for p, e in zip(curve.powers, curve.energies):
            fh.write(f"{p!r},{e!r}\n")


def _cmd_dispatch(args) -> int:
    fleet = _load_fleet(args.fleet)
    reference = read_trace_csv(args.reference, duration_h=args.duration)
    trace = run_dispatch(
        fleet,
        fleet.initial_state(),
        reference,
        policy=args.policy,
        recharge=args.recharge,
        dt_h=args.dt,
    )
    out = _out_dir(args)
    write_run_trace_csv(out / "run_trace.csv", trace, fleet)
    events = segment_events(trace, fleet)
    summary = {
        "policy": args.policy,
        "steps": len(trace.records),
        "total_ens_kwh": trace.total_ens_kwh,
        "total_served_kwh": trace.total_served_kwh,
        "shortfall_events": [
            {
                "start_index": ev.start_index,
                "end_index": ev.end_index,
                "ens_kwh": ev.ens_kwh,
                "fully_charged_at_start": ev.fully_charged_at_start,
            }
            for ev in events
        ],
    }
    (out / "run_summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary, indent=2))
    return 0


def _cmd_ep(args) -> int:
    fleet = _load_fleet(args.fleet)
    reference = read_trace_csv(args.reference, duration_h=args.duration)
    curve = ep_transform(reference)
    capacity = capacity_curve(fleet, fleet.initial_state())
    gap = max_energy_gap(curve, capacity)
    level = shave_level(curve, gap)
    kind = classify_infeasibility(
        curve, capacity, reference.peak_kw, fleet.total_discharge_kw
    )
    out = _out_dir(args)
    _write_curve_csv(out / "reference_ep.csv", curve)
    _write_curve_csv(out / "capacity_ep.csv", capacity)
    report = {
        "max_energy_gap_kwh": gap,
        "shave_level_kw": level,
        "classification": kind.value,
        "reference_energy_kwh": curve.total_energy_kwh,
        "capacity_energy_kwh": capacity.total_energy_kwh,
        "reference_peak_kw": reference.peak_kw,
        "fleet_power_kw": fleet.total_discharge_kw,
    }
    (out / "ep_report.json").write_text(json.dumps(report, indent=2) + "\n")
    print(json.dumps(report, indent=2))
    return 0


def _cmd_adequacy(args) -> int:
    config = load_study_config(args.config)
    config = override_config(config, years=args.years, seed=args.seed)
    logger.info("running %d-year study with %d workers", config.years, args.workers)
    result = run_adequacy_study(config, workers=args.workers)
    out = _out_dir(args)
    (out / "study_result.json").write_text(result.to_json() + "\n")
    print(render_result_table(result))
    return 0


def _cmd_demo(args) -> int:
    trace = run_demo()
    print(format_demo_table(trace, demo_fleet()))
    if abs(ens_of_run(trace) - 5.0) > 1e-9:
        print("warning: demo ENS deviates from the expected 5 kWh", file=sys.stderr)
        return 2
    return 0


def _cmd_verify(args) -> int:
    report = run_agreement_suite(instances=args.instances, seed=args.seed)
    print(
        f"agreement suite: {report.instances - report.failures}/{report.instances} "
        f"instances passed (largest deviation {report.max_abs_diff_kwh:.3e} kWh)"
    )
    for message in report.messages:
        print(message, file=sys.stderr)
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="ucap",
        description=(
            "Dispatch energy-constrained storage fleets against shortfall "
            "traces, analyse feasibility in E-p space, and run Monte Carlo "
            "generation adequacy studies."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_dispatch = sub.add_parser("dispatch", help="run a policy over a reference trace")
    p_dispatch.add_argument("--fleet", required=True, help="fleet CSV file")
    p_dispatch.add_argument("--reference", required=True, help="reference trace CSV")
    p_dispatch.add_argument(
        "--policy", default="optimal", choices=POLICY_NAMES, help="dispatch policy"
    )
    p_dispatch.add_argument("--dt", type=float, default=None,
                            help="cut intervals to at most this many hours")
    p_dispatch.add_argument("--duration", type=float, default=None,
                            help="trace duration when the CSV has no terminal row")
    p_dispatch.add_argument("--recharge", action="store_true",
                            help="charge from negative (surplus) requests")
    p_dispatch.add_argument("--out-dir", default=".", help="output directory")
    p_dispatch.set_defaults(func=_cmd_dispatch)

    p_ep = sub.add_parser("ep", help="E-p curves, energy gap and classification")
    p_ep.add_argument("--fleet", required=True, help="fleet CSV file")
    p_ep.add_argument("--reference", required=True, help="reference trace CSV")
    p_ep.add_argument("--duration", type=float, default=None,
                      help="trace duration when the CSV has no terminal row")
    p_ep.add_argument("--out-dir", default=".", help="output directory")
    p_ep.set_defaults(func=_cmd_ep)

    p_adequacy = sub.add_parser("adequacy", help="run a Monte Carlo adequacy study")
    p_adequacy.add_argument("--config", required=True, help="study config JSON")
    p_adequacy.add_argument("--years", type=int, default=None,
                            help="override the configured year count")
    p_adequacy.add_argument("--seed", type=int, default=None,
                            help="override the configured seed")
    p_adequacy.add_argument("--workers", type=int, default=1,
                            help="process workers (result is worker-invariant)")
    p_adequacy.add_argument("--out-dir", default=".", help="output directory")
    p_adequacy.set_defaults(func=_cmd_adequacy)

    p_demo = sub.add_parser("demo", help="print the four-device example table")
    p_demo.set_defaults(func=_cmd_demo)

    p_verify = sub.add_parser("verify", help="run the three-way oracle agreement suite")
    p_verify.add_argument("--instances", type=int, default=200,
                          help="number of random instances")
    p_verify.add_argument("--seed", type=int, default=2024, help="instance seed")
    p_verify.set_defaults(func=_cmd_verify)

    return parser


def main(argv=None) -> int:
    level = os.environ.get("UCAP_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UcapError as exc:
        print(f"ucap: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - defensive
        logger.exception("unexpected failure")
        print(f"ucap: unexpected error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
