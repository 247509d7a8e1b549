from __future__ import annotations

import argparse
import json
import logging
import os
from pathlib import Path
import sys
from typing import Iterable, List, Optional, Tuple

from caplab.config import ConfigError, ConfigLoader, ScenarioConfig, TaskConfig
from caplab.logging_utils import LoggerFactory

SUBCOMMANDS = ("run", "capacity", "quasilocal", "symmetrize", "verify", "glue", "sweep", "diff")
# Subcommands that can run without a matching task in the scenario.
_IMPLICIT_TASKS = ("capacity", "quasilocal", "symmetrize")


def main(argv: Optional[Iterable[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = _parse_args(argv)

    if args.command == "diff":
        LoggerFactory.create("caplab", log_file=args.log_file, level=args.log_level or "INFO")
        return _diff(args.bundle_a, args.bundle_b)

    try:
        configs = [_load(path, args) for path in args.config]
    except ConfigError as exc:
        LoggerFactory.create("caplab")
        logger = logging.getLogger("caplab")
        logger.error("Config error: %s", exc)
        return 2

    log_path = args.log_file or os.getenv("CAPLAB_LOG_PATH") or configs[0].logging.file_path
    LoggerFactory.create("caplab", log_file=log_path, level=args.log_level or configs[0].logging.level)
    logger = logging.getLogger("caplab")
    for config in configs:
        logger.info("Config summary: %s", _config_summary(config))

    # Numerical modules load only once the scenarios are known to be valid.
    from caplab.runner import run_batch

    only = None if args.command == "run" else args.command
    outcomes = run_batch(configs, Path(args.out), workers=args.workers, only=only, argv=argv)
    for outcome in outcomes:
        logger.info("Bundle %s written to %s", outcome.scenario_id, outcome.bundle_dir)
    return max((outcome.exit_status for outcome in outcomes), default=0)


def _load(path: str, args: argparse.Namespace) -> ScenarioConfig:
    config = ConfigLoader(config_path=Path(path)).load()
    config = config.with_numerics(grid=args.grid, fd_tol=args.tol)
    if args.command in _IMPLICIT_TASKS and not any(task.kind == args.command for task in config.tasks):
        config = ScenarioConfig(
            id=config.id,
            metric=config.metric,
            boundary=config.boundary,
            numerics=config.numerics,
            tasks=config.tasks + (TaskConfig(kind=args.command),),
            logging=config.logging,
            source=config.source,
        )
    return config


def _diff(bundle_a: str, bundle_b: str) -> int:
    from caplab.report_store import BundleError, report_diff

    logger = logging.getLogger("caplab")
    try:
        summary = report_diff(Path(bundle_a), Path(bundle_b))
    except BundleError as exc:
        logger.error("Diff failed: %s", exc)
        return 2
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def _config_summary(config: ScenarioConfig) -> dict:
    return {
        "id": config.id,
        "source": config.source,
        "metric": {
            "kind": config.metric.kind,
            "m": config.metric.m,
            "path": config.metric.path,
        },
        "boundary": {
            "kind": config.boundary.kind,
            "r0": config.boundary.r0,
            "path": config.boundary.path,
        },
        "numerics": config.numerics.to_dict(),
        "tasks": [task.label for task in config.tasks],
    }


def _grid(value: str) -> Tuple[int, int]:
    try:
        n_rho, n_mu = (int(part) for part in value.lower().split("x"))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"Grid must look like 256x128, got {value!r}") from exc
    return n_rho, n_mu


def _parse_args(argv: List[str]) -> argparse.Namespace:
    parser = argparse.ArgumentParser(prog="caplab", description="Capacity and quasi-local mass lab")
    parser.add_argument("--log-file", help="Also write logs to this file")
    parser.add_argument("--log-level", default=None, help="Log level (default from the scenario, else INFO)")
    commands = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS[:-1]:
        sub = commands.add_parser(name, help=f"Run the {name} tasks of each scenario" if name != "run" else "Run every task")
        sub.add_argument("--config", action="append", required=True, help="Scenario YAML file (repeatable)")
        sub.add_argument("--out", default="out", help="Directory that receives one bundle per scenario")
        sub.add_argument("--grid", type=_grid, default=None, help="Meridian grid NxM")
        sub.add_argument("--tol", type=float, default=None, help="Finite-difference tolerance")
        sub.add_argument("--workers", type=int, default=1, help="Scenarios to run concurrently")
    diff = commands.add_parser("diff", help="Compare two bundles of the same scenario")
    diff.add_argument("bundle_a")
    diff.add_argument("bundle_b")
    return parser.parse_args(argv)


if __name__ == "__main__":
    raise SystemExit(main())
