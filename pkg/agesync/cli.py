"""Command line interface: ``agesync align|simulate|evaluate|diagnose|runs``."""
from __future__ import annotations

import argparse
import contextlib
import logging
import sys
from pathlib import Path
from typing import Iterator, Optional, Sequence

from . import __version__
from .config import RunConfig, load_config, with_overrides
from .core import RunsManager
from .errors import AgeSyncException, ConfigError
from .helpers import FileHelper
from .io import remove_result
from .pipeline import align, align_grid, diagnose, evaluate, evaluate_grid, simulate, simulate_grid

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _configure_logging(verbose: bool) -> None:
    package_logger = logging.getLogger("agesync")
    package_logger.setLevel(logging.DEBUG if verbose else logging.INFO)
    if not any(isinstance(h, logging.StreamHandler) and not isinstance(h, logging.FileHandler)
               for h in package_logger.handlers):
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        package_logger.addHandler(handler)


@contextlib.contextmanager
def _run_log(path: Path) -> Iterator[None]:
    """Mirrors the package log into one file per run."""
    path.parent.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(path, encoding="utf-8")
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    package_logger = logging.getLogger("agesync")
    package_logger.addHandler(handler)
    try:
        yield
    finally:
        package_logger.removeHandler(handler)
        handler.close()


def _load(args: argparse.Namespace) -> RunConfig:
    config = load_config(args.config, args.overrides, args.preset)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.name is not None:
        changes["name"] = args.name
    if args.output is not None:
        changes["output__directory"] = args.output
    return with_overrides(config, **changes) if changes else config


def _default_name(kind: str, config: RunConfig) -> str:
    if config.name:
        return config.name
    if kind == "align":
        stem = config.data.input.stem if config.data.input else "input"
        return f"align {config.strategy.value} {stem} seed {config.seed}"
    return f"simulate seed {config.seed}"


def _attributes(config: RunConfig) -> dict:
    return {
        "seed": config.seed,
        "mode": config.mode.value,
        "strategy": config.strategy.value,
        "config": config.to_ini(),
    }


def _cataloged(kind: str, config: RunConfig, work) -> int:
    """Runs ``work(output_dir)`` inside a catalogued run, removing partial output on failure."""
    manager = RunsManager()
    name = manager.get_clean_run_name(_default_name(kind, config))
    output = config.output.directory
    if output is None:
        output = manager.file_helper.get_run_output_directory(name)
    output = Path(output)
    created = not output.exists()
    with _run_log(manager.log_file(name)):
        try:
            manager.create_run(name, kind, _attributes(config), exist_ok=True, dir_output=output)
            work(output)
        except BaseException:
            logger.error("%s run %s failed; removing partial output in %s", kind, name, output)
            if created:
                FileHelper.delete_run_directory(output)
            elif kind == "align":
                remove_result(output)
            manager.delete_run(name, not_exist_ok=True, delete_dir=False)
            raise
    print(output)
    return 0


def _cmd_align(args: argparse.Namespace) -> int:
    config = _load(args)
    if args.grid is not None:
        align_grid(config, Path(args.grid), args.workers)
        return 0
    config.require_inputs()
    return _cataloged("align", config, lambda output: align(config, output))


def _cmd_simulate(args: argparse.Namespace) -> int:
    config = _load(args)
    if args.grid:
        return _cataloged("simulate", config, lambda output: simulate_grid(config, output))
    return _cataloged("simulate", config, lambda output: simulate(config, output))


def _truth_from_run(run_dir: Path) -> Path:
    echo = run_dir / "config.ini"
    if echo.is_file():
        truth = load_config(echo).data.truth
        if truth is not None:
            return truth
    raise ConfigError(f"no truth file given and none recorded in {echo}")


def _cmd_evaluate(args: argparse.Namespace) -> int:
    if args.grid is not None:
        heatmap = evaluate_grid(Path(args.grid), args.output)
        print(heatmap.to_string(index=False))
        return 0
    if args.run is not None:
        run_dir = Path(args.run)
        ages = run_dir / "ages.csv"
        truth = Path(args.truth) if args.truth else _truth_from_run(run_dir)
    elif args.ages and args.truth:
        ages, truth = Path(args.ages), Path(args.truth)
    else:
        raise ConfigError("evaluate needs --run, --grid, or both --ages and --truth")
    output = Path(args.output) if args.output else ages.parent
    card = evaluate(ages, truth, output)
    for metric, value in card.as_dict().items():
        print(f"{metric}\t{value:.6g}")
    return 0


def _cmd_diagnose(args: argparse.Namespace) -> int:
    if args.run is not None:
        chain = Path(args.run) / "chain.csv"
    elif args.chain is not None:
        chain = Path(args.chain)
    else:
        raise ConfigError("diagnose needs --run or --chain")
    report = diagnose(chain, args.threshold)
    for metric, value in report.items():
        if metric != "iat_pass":
            print(f"{metric}\t{value:.6g}")
    print(f"status\t{'pass' if report['iat_pass'] else 'warn'}")
    return 0


def _cmd_runs(args: argparse.Namespace) -> int:
    manager = RunsManager()
    for run in manager:
        print(f"{run.name}\t{run.kind}\t{run.dir_output}")
    return 0


def _add_config_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="INI configuration file")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="override one configuration value (repeatable)",
    )
    parser.add_argument("--preset", choices=("desk", "full"), help="sampler budget preset")
    parser.add_argument("--output", type=Path, help="output directory")
    parser.add_argument("--seed", type=int, help="random seed")
    parser.add_argument("--name", help="run name in the catalog")


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subcommand per operation."""
    parser = argparse.ArgumentParser(
        prog="agesync", description="Bayesian synchronization of proxy records."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    commands = parser.add_subparsers(dest="command", required=True)

    align_parser = commands.add_parser("align", help="align an input record to its target(s)")
    _add_config_options(align_parser)
    align_parser.add_argument("--grid", type=Path, help="align every cell of a simulated grid")
    align_parser.add_argument("--workers", type=int, default=1, help="parallel grid cells")
    align_parser.set_defaults(handler=_cmd_align)

    simulate_parser = commands.add_parser("simulate", help="write a synthetic fixture")
    _add_config_options(simulate_parser)
    simulate_parser.add_argument(
        "--grid", action="store_true", help="one fixture per (noise, fraction) cell"
    )
    simulate_parser.set_defaults(handler=_cmd_simulate)

    evaluate_parser = commands.add_parser("evaluate", help="score ages against true ages")
    evaluate_parser.add_argument("--ages", type=Path, help="ages.csv of an alignment")
    evaluate_parser.add_argument("--truth", type=Path, help="truth.csv of a fixture")
    evaluate_parser.add_argument("--run", type=Path, help="alignment output directory")
    evaluate_parser.add_argument("--grid", type=Path, help="aligned grid root")
    evaluate_parser.add_argument("--output", type=Path, help="where to write the scorecard")
    evaluate_parser.set_defaults(handler=_cmd_evaluate)

    diagnose_parser = commands.add_parser("diagnose", help="mixing diagnostics of a chain")
    diagnose_parser.add_argument("--chain", type=Path, help="chain.csv")
    diagnose_parser.add_argument("--run", type=Path, help="alignment output directory")
    diagnose_parser.add_argument("--threshold", type=float, default=50.0, help="IAT pass threshold")
    diagnose_parser.set_defaults(handler=_cmd_diagnose)

    runs_parser = commands.add_parser("runs", help="list catalogued runs")
    runs_parser.set_defaults(handler=_cmd_runs)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point; returns the process exit code."""
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    try:
        return args.handler(args)
    except AgeSyncException as error:
        logger.error("%s", error)
        return error.exit_code


if __name__ == "__main__":
    sys.exit(main())
