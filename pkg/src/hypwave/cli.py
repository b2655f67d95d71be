"""Command-line surface: run, sweep, converge, list.

Exit codes: 0 when every record passed its thresholds, 2 when a threshold
was violated (the failing metric is printed), 1 on configuration or
runtime errors. The default output directory can be set with the
HYPWAVE_OUT environment variable.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import os
import sys
from dataclasses import replace

from .errors import ConfigurationError
from .experiments import (
    EXPERIMENTS,
    ExperimentConfig,
    convergence_study,
    emit_report,
    parse_config,
    run_experiment,
    serialize_config,
)


def _override(config: ExperimentConfig, key: str, value: str) -> ExperimentConfig:
    from .experiments import _KEYMAP  # dotted key -> field name
    key = key.strip()
    if key not in _KEYMAP:
        raise ConfigurationError(f"unknown key {key!r}")
    field_name = _KEYMAP[key]
    current = getattr(config, field_name)
    if isinstance(current, bool):
        raise ConfigurationError(f"key {key!r} is not settable")
    if isinstance(current, int):
        parsed = int(value)
    elif isinstance(current, float):
        parsed = float(value)
    else:
        parsed = value.strip()
    return replace(config, **{field_name: parsed}).validate()


def _load_config(args) -> ExperimentConfig:
    text = ""
    if args.config:
        with open(args.config, encoding="utf-8") as handle:
            text = handle.read()
    config = parse_config(text)
    for item in args.set or []:
        key, _, value = item.partition("=")
        if not value:
            raise ConfigurationError(f"--set expects key=value, got {item!r}")
        config = _override(config, key, value)
    return config


def _out_path(args, stem: str) -> str | None:
    if args.out:
        return args.out
    base = os.environ.get("HYPWAVE_OUT")
    if base:
        os.makedirs(base, exist_ok=True)
        return os.path.join(base, f"{stem}.{args.format}")
    return None


def _finish(records, args, stem: str) -> int:
    text = emit_report(records, args.format, _out_path(args, stem))
    sys.stdout.write(text)
    failing = [rec for rec in records if not rec.passed]
    if failing:
        for rec in failing:
            print(f"THRESHOLD VIOLATION: {rec.experiment}: {rec.failed_metric}",
                  file=sys.stderr)
        return 2
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="hypwave",
        description="numerical experiments for wave maps on hyperbolic space")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="config file (key = value lines)")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key (repeatable)")
        p.add_argument("--out", help="output file path")
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    p_run = sub.add_parser("run", help="run one experiment")
    common(p_run)
    p_sweep = sub.add_parser("sweep", help="run an experiment over parameter values")
    common(p_sweep)
    p_sweep.add_argument("--sweep", required=True, metavar="KEY=V1,V2,...",
                         help="config key and comma-separated values")
    p_sweep.add_argument("--jobs", type=int, default=1, help="parallel workers")
    p_conv = sub.add_parser("converge", help="convergence study under refinement")
    common(p_conv)
    p_conv.add_argument("--refinements", type=int, default=3)
    sub.add_parser("list", help="list registered experiments")

    args = parser.parse_args(argv)
    if args.command == "list":
        for name in sorted(EXPERIMENTS):
            print(name)
        return 0

    try:
        config = _load_config(args)
        if args.command == "run":
            return _finish(run_experiment(config), args, config.experiment)
        if args.command == "converge":
            return _finish(convergence_study(config, args.refinements), args,
                           f"{config.experiment}-convergence")
        # sweep
        key, _, raw = args.sweep.partition("=")
        if not raw:
            raise ConfigurationError(f"--sweep expects key=v1,v2,..., got {args.sweep!r}")
        configs = [_override(config, key, value) for value in raw.split(",")]
        records = []
        if args.jobs > 1:
            with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
                for recs in pool.map(run_experiment, configs):
                    records.extend(recs)
        else:
            for cfg in configs:
                records.extend(run_experiment(cfg))
        return _finish(records, args, f"{config.experiment}-sweep")
    except ConfigurationError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except Exception as err:  # noqa: BLE001 - CLI boundary
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
