"""Command-line interface: run and validate closed-loop scenarios.

``flexlink run <config.toml>`` executes a scenario and writes its CSV logs
and summary; ``flexlink validate <config.toml>`` checks a scenario file
without running it.  Both accept ``--preset <name>`` in place of a path to
use one of the packaged scenario files.

Exit codes: 0 on success, 2 for configuration problems (schema, physics, or
argument errors), 3 when a run fails numerically (partial logs are kept).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, load_config, preset_path, validate_file
from .simulate import run_compare, run_scenario

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flexlink",
        description="Simulate and validate two-link flexible-arm control scenarios.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a scenario and write CSV logs")
    run_p.add_argument("config", nargs="?", default=None, help="scenario TOML file")
    run_p.add_argument("--preset", default=None, help="packaged scenario name")
    run_p.add_argument("--out", default=None, help="output directory override")
    run_p.add_argument("--seed", type=int, default=None, help="random seed override")
    run_p.add_argument("--dt", type=float, default=None, help="control period override [s]")
    run_p.add_argument("--tf", type=float, default=None, help="run duration override [s]")

    val_p = sub.add_parser("validate", help="check a scenario file without running")
    val_p.add_argument("config", nargs="?", default=None, help="scenario TOML file")
    val_p.add_argument("--preset", default=None, help="packaged scenario name")
    return parser


def _resolve_path(parser: argparse.ArgumentParser, args: argparse.Namespace) -> Path:
    if (args.config is None) == (args.preset is None):
        parser.error("provide exactly one of a config path or --preset")
    if args.preset is not None:
        return preset_path(args.preset)
    return Path(args.config)


def _print_errors(exc: ConfigError) -> None:
    for line in exc.errors:
        print(f"error: {line}", file=sys.stderr)


def _report_run(result) -> None:
    s = result.summary
    print(f"{s['scenario']}: {s['status']}; {s['samples_logged']} samples logged")
    print(f"  controller={s['controller']} dt={s['dt']} t_f={s['t_f']} seed={s['seed']}")
    if s.get("joint_tracking"):
        rms = ", ".join(f"{v:.3e}" for v in s["joint_tracking"]["steady_state_rms_rad"])
        print(f"  steady-state joint RMS [rad]: {rms}")
    if s.get("actuation"):
        print(f"  peak |torque| = {s['actuation']['torque_max_abs']:.2f} N·m")
    print(f"  wall time {s['wall_time_s']:.1f} s -> {result.out_dir}")


def _cmd_run(parser: argparse.ArgumentParser, args: argparse.Namespace) -> int:
    path = _resolve_path(parser, args)
    config = load_config(path)
    if config.controller == "compare":
        results = run_compare(
            config, out_dir=args.out, seed=args.seed, dt=args.dt, tf=args.tf
        )
        for result in results:
            _report_run(result)
        return max(r.exit_code for r in results)
    result = run_scenario(
        config, out_dir=args.out, seed=args.seed, dt=args.dt, tf=args.tf
    )
    _report_run(result)
    if result.status != "ok":
        print(f"numerical failure: {result.summary['failure']}", file=sys.stderr)
    return result.exit_code


def _cmd_validate(parser: argparse.ArgumentParser, args: argparse.Namespace) -> int:
    path = _resolve_path(parser, args)
    report = validate_file(path)
    print(report)
    return 0 if report.ok else 2


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(parser, args)
        if args.command == "validate":
            return _cmd_validate(parser, args)
    except ConfigError as exc:
        _print_errors(exc)
        return 2
    parser.error(f"unknown command {args.command!r}")
    return 2


if __name__ == "__main__":
    sys.exit(main())
