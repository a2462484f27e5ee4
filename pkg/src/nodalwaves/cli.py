"""Command-line entry point: ``nodalwaves {verify,simulate,chaos,scaling}``."""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import experiments
from .config import ConfigError, ExperimentConfig
from .radial import ConvergenceError
from .wavefield import ConditioningError

EXIT_OK, EXIT_USAGE, EXIT_MISMATCH, EXIT_NUMERIC = 0, 1, 2, 3

PRECEDENCE = """\
precedence (highest first):
  1. command-line flags (--seed, --tolerance, --out, --radii, ...)
  2. fields of the JSON document given by --config
  3. built-in defaults
--threads falls back to the RWM_THREADS environment variable, then 1.

exit codes: 0 success, 1 usage error, 2 mismatch outside the documented
open questions, 3 numeric failure."""


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nodalwaves", description="Random wave nodal-length laboratory.",
                     epilog=PRECEDENCE, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "verify": "recompute published constants and the variance ledger",
        "simulate": "Monte Carlo nodal length statistics",
        "chaos": "empirical second and fourth chaos projections",
        "scaling": "fit log(Var/E^2) against log R",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text, epilog=PRECEDENCE,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("--config", metavar="PATH", help="JSON experiment config")
        p.add_argument("--out", metavar="PATH", help="CSV output (appended to if present)")
        p.add_argument("--seed", type=int, metavar="U64")
        p.add_argument("--threads", type=int, metavar="N")
        p.add_argument("--tolerance", type=float, metavar="F")
        if name != "verify":
            p.add_argument("--dim", type=int, choices=(2, 3))
            p.add_argument("--radii", type=float, nargs="+", metavar="R")
            p.add_argument("--replicates", type=int, metavar="N")
            p.add_argument("--n-waves", type=int, metavar="N")
            p.add_argument("--grid-spacing", type=float, metavar="H")
        else:
            p.add_argument("--mc-samples", type=int, default=experiments.MC_SAMPLES,
                           metavar="N", help="samples per Hermite coefficient")
    return parser


def resolve_threads(flag: int | None) -> int:
    if flag is not None:
        value = flag
    else:
        env = os.environ.get("RWM_THREADS")
        if env is None:
            return 1
        try:
            value = int(env)
        except ValueError as exc:
            raise UsageError(f"RWM_THREADS must be an integer, got {env!r}") from exc
    if value < 1:
        raise UsageError("thread count must be >= 1")
    return value


def resolve_config(args) -> ExperimentConfig:
    base = ExperimentConfig.from_json(args.config).to_dict() if args.config else {}
    base["kind"] = args.command
    if args.command == "verify":
        base.setdefault("replicates", 1)
    overrides = {
        "seed": args.seed,
        "tolerance": args.tolerance,
        "output": args.out,
        "dim": getattr(args, "dim", None),
        "radii": getattr(args, "radii", None),
        "replicates": getattr(args, "replicates", None),
        "n_waves": getattr(args, "n_waves", None),
        "grid_spacing": getattr(args, "grid_spacing", None),
    }
    base.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(base)


def _default_out(config: ExperimentConfig) -> Path:
    return Path(config.output or f"{config.experiment_id}-{config.kind}.csv")


def _check_finite(rows):
    bad = [r.statistic for r in rows if not math.isfinite(r.value)]
    if bad:
        raise FloatingPointError(f"non-finite results: {bad}")


def _summary(rows, extra: list[str] = ()) -> str:
    lines = []
    for r in rows:
        R = "" if r.R is None else f" R={r.R:g}"
        ref = "" if r.paper_value is None else f" ref={r.paper_value:.10g}"
        err = "" if r.stderr is None else f" +- {r.stderr:.3g}"
        lines.append(f"[{r.flag:8s}]{R} {r.statistic}: {r.value:.10g}{err}{ref}")
    regressions = [r for r in rows if r.is_regression]
    expected = [r for r in rows if r.flag == "mismatch" and r.open_question]
    lines.extend(extra)
    lines.append(f"{len(rows)} rows, {len(regressions)} mismatches, "
                 f"{len(expected)} open-question mismatches")
    return "\n".join(lines)


def run(args) -> int:
    threads = resolve_threads(args.threads)
    config = resolve_config(args)
    out = _default_out(config)
    extra = []
    if args.command == "verify":
        if args.mc_samples < 10_000:
            raise UsageError("--mc-samples must be at least 1e4")
        rows, report = experiments.run_verification_suite(
            config.tolerance, config.seed, threads, args.mc_samples, config.experiment_id)
        ledger_path = out.with_suffix(".ledger.json")
        ledger_path.write_text(report.to_json(indent=2) + "\n")
        extra.append(f"ledger report: {ledger_path}")
    elif args.command == "simulate":
        rows, _ = experiments.run_simulation(config, threads)
    elif args.command == "chaos":
        rows, _ = experiments.run_chaos_study(config, threads)
    else:
        rows, fit = experiments.run_scaling_study(config, threads)
        extra.append(f"fitted slope {fit['slope']:.4f} (target {fit['target']:g})")
    _check_finite([r for r in rows if r.flag != "mismatch"])
    experiments.write_rows(rows, out, config)
    extra.append(f"results: {out}")
    print(_summary(rows, extra))
    return EXIT_MISMATCH if any(r.is_regression for r in rows) else EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return run(args)
    except (ConfigError, UsageError) as exc:
        print(f"nodalwaves: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConvergenceError, ConditioningError, FloatingPointError,
            np.linalg.LinAlgError) as exc:
        print(f"nodalwaves: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
