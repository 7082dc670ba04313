"""Command-line entry point: ``slmc run | preset | validate``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .experiments import PRESETS, ConfigError, emit_outputs, load_config, preset, run_experiment
from .validation import CHECKS, run_all


def _summarise(report) -> str:
    metric = report.series[0].metric if report.series else "-"
    lines = [f"{report.config.experiment} experiment, {report.config.repetitions} repetition(s), {report.runtime:.1f}s"]
    for arm in report.arms():
        finals = report.final_values(arm, metric)
        aborted = sum(s.aborted for s in report.select(arm, metric))
        note = f"  ({aborted} diverged)" if aborted else ""
        lines.append(f"  {arm:<24} final {metric} mean {np.mean(finals):.4g}{note}")
    return "\n".join(lines)


def _execute(cfg, out, threads) -> int:
    report = run_experiment(cfg, threads=threads)
    manifest = emit_outputs(report, out)
    print(_summarise(report))
    print(f"wrote {len(manifest)} files to {out}")
    return 0


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    out = args.out or cfg.out or "slmc-out"
    return _execute(cfg, out, args.threads)


def cmd_preset(args) -> int:
    overrides = {k: v for k, v in (("steps", args.steps), ("repetitions", args.repetitions), ("ensemble", args.ensemble)) if v is not None}
    if args.seed is not None:
        overrides["seed"] = args.seed
    cfg = preset(args.name, **overrides)
    return _execute(cfg, args.out or f"slmc-out/{args.name}", args.threads)


def cmd_validate(args) -> int:
    report = run_all(args.seed, only=args.only)
    print(report.to_text())
    if args.json:
        Path(args.json).write_text(report.to_json() + "\n")
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="slmc", description="Subspace Langevin Monte Carlo experiments and checks.")
    p.add_argument("--threads", type=int, default=1, help="repetitions run in parallel (default 1)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment from a YAML config")
    r.add_argument("--config", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--out")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("preset", help="run the experiment behind a figure panel")
    s.add_argument("--name", required=True, choices=list(PRESETS))
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.add_argument("--steps", type=int, help="override the number of steps")
    s.add_argument("--repetitions", type=int, help="override the number of repetitions")
    s.add_argument("--ensemble", type=int, help="override the number of chains")
    s.set_defaults(func=cmd_preset)

    v = sub.add_parser("validate", help="run the numerical checks; exits 1 if any fails")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--only", nargs="+", choices=list(CHECKS))
    v.add_argument("--json", help="also write the report as JSON to this path")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
