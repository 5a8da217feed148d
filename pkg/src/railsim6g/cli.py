"""Command-line entry point: ``railsim6g run <file>`` and ``railsim6g list``."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .core.config import ConfigError, ScenarioParseError, load_scenario
from .core.metrics import MetricsError, write_table
from .core.rng import MAX_SEED
from .core.runner import UnknownScenarioError, list_experiments, run_scenario
from .core.units import UnitError

EXIT_OK, EXIT_ERROR, EXIT_INVALID = 0, 1, 2
LOG_ENV = "RAILSIM6G_LOG"

log = logging.getLogger("railsim6g")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="railsim6g", description="Deterministic 6G smart-railway link-level experiments")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario file")
    run.add_argument("scenario", type=Path)
    run.add_argument("--seed", type=int, help="override the file's seed")
    run.add_argument("--trials", type=int, help="override the file's trial count")
    run.add_argument("--out", type=Path, help="output path (default: file's output_path or stdout)")
    run.add_argument("--format", choices=("csv", "json"), default=None,
                     help="table format (default: from --out suffix, else csv)")
    sub.add_parser("list", help="list registered scenarios")
    return p


def _setup_logging() -> None:
    level = os.environ.get(LOG_ENV, "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _run(args) -> int:
    if args.seed is not None and not 0 <= args.seed <= MAX_SEED:
        raise ConfigError("seed", "must be a 64-bit unsigned integer")
    if args.trials is not None and args.trials < 1:
        raise ConfigError("trials", "must be >= 1")
    config = load_scenario(args.scenario).with_overrides(seed=args.seed, trials=args.trials)
    table = run_scenario(config)
    out = args.out or (Path(config.output_path) if config.output_path else None)
    fmt = args.format or ("json" if out is not None and out.suffix == ".json" else "csv")
    if out is None:
        sys.stdout.write(table.to_csv() if fmt == "csv" else table.to_json())
    else:
        write_table(table, out, fmt)
        log.info("wrote %s", out)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    args = _parser().parse_args(argv)
    try:
        if args.command == "list":
            for exp in list_experiments():
                print(f"{exp.name:16s} {exp.description}")
            return EXIT_OK
        return _run(args)
    except (ConfigError, ScenarioParseError, UnitError, UnknownScenarioError, MetricsError) as exc:
        print(f"railsim6g: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except FileNotFoundError as exc:
        print(f"railsim6g: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # anything else is a runtime failure
        print(f"railsim6g: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
