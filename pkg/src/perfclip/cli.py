"""
perfclip command line
=====================

Subcommands run experiments, sweeps, oracles, privacy calibration and bound
checks over a TOML config, a named preset, or both. Results go to stdout as
JSON and to files under the output directory; failures print one line

    error category=<name> message=<text>

on stderr and exit with 2 (configuration), 3 (numerical) or 4 (I/O).
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from . import __version__
from .commands import (
    calibrate_command,
    check_bounds_command,
    handle_calibrate,
    handle_check_bounds,
    handle_oracle,
    handle_run,
    handle_sweep,
    oracle_command,
    run_command,
    sweep_command,
)
from .commands.base import CommandContext
from .config import Settings, configure_logging
from .errors import PerfclipError
from .harness.output import to_jsonable, write_json
from .harness.resources import ExperimentResources
from .harness.schema import load_config
from .presets import PRESETS, get_preset

logger = logging.getLogger("perfclip.cli")

COMMANDS = (run_command, sweep_command, oracle_command, calibrate_command, check_bounds_command)

HANDLERS = {
    "run": handle_run,
    "sweep": handle_sweep,
    "oracle": handle_oracle,
    "calibrate": handle_calibrate,
    "check-bounds": handle_check_bounds,
}

EXIT_CODES = {
    "config": 2,
    "precondition": 2,
    "calibration": 2,
    "invalid-input": 2,
    "ill-posed": 2,
    "unsupported-operation": 2,
    "unsupported-configuration": 2,
    "numerical": 3,
    "divergence": 3,
    "non-convergence": 3,
    "fit": 3,
    "io": 4,
}


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML config (or a resolved config / metadata JSON)")
    common.add_argument("--preset", help=f"Start from a named preset ({', '.join(PRESETS)})")
    common.add_argument("--out", type=Path, help="Output directory")
    common.add_argument("--seed", type=int, help="Experiment seed (overrides experiment.seed)")
    common.add_argument("--trials", type=int, help="Number of trials (overrides experiment.n_trials)")
    common.add_argument("--workers", type=int, help="Worker processes; results do not depend on it")
    common.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
        help="Dotted override such as optimizer.c=1.0 (repeatable)",
    )
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="Warnings and errors only")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="perfclip",
        description="Clipped SGD under decision-dependent distributions: simulator and bound checker",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common_options()
    for command in COMMANDS:
        p = sub.add_parser(command.name, help=command.description, description=command.description, parents=[common])
        for option in command.options:
            p.add_argument(*option.flags, **option.kwargs)
    sub.add_parser("presets", help="List the named presets")
    return parser


def _overrides(args: argparse.Namespace) -> List[str]:
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"experiment.seed={args.seed}")
    if args.trials is not None:
        overrides.append(f"experiment.n_trials={args.trials}")
    return overrides


def _output_dir(args: argparse.Namespace, settings: Settings, config) -> Path:
    if args.out is not None:
        return args.out
    if config.experiment.output_dir:
        return Path(config.experiment.output_dir)
    return settings.OUTPUT_DIR / config.experiment.name


def _print(result: Dict[str, Any]) -> None:
    print(json.dumps(to_jsonable(result), indent=2, sort_keys=True))


def list_presets() -> Dict[str, str]:
    return {name: preset.description for name, preset in PRESETS.items()}


def dispatch(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse arguments, run one subcommand and return the process exit status.
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    settings = Settings()
    configure_logging(settings, 1 if getattr(args, "verbose", False) else -1 if getattr(args, "quiet", False) else 0)

    if args.command == "presets":
        _print(list_presets())
        return 0

    logger.info(f"perfclip {__version__}: {args.command}")
    try:
        preset = get_preset(args.preset) if args.preset else None
        config = load_config(args.config, preset, _overrides(args))
        out_dir = _output_dir(args, settings, config)
        context = CommandContext(config, ExperimentResources(config), settings, out_dir, args.workers)

        command = next(c for c in COMMANDS if c.name == args.command)
        result = HANDLERS[args.command](context, vars(args))
        if not command.writes_outputs:
            write_json(result, out_dir / f"{command.name.replace('-', '_')}.json")
            write_json(config.resolved(), out_dir / "config.json")
        _print(result)
        return 0
    except PerfclipError as e:
        message = " ".join(str(e).split())
        logger.debug(f"Command {args.command} failed", exc_info=True)
        print(f"error category={e.category} message={message}", file=sys.stderr)
        return EXIT_CODES.get(e.category, 1)


def main(argv: Optional[Sequence[str]] = None) -> None:
    """Console-script entry point."""
    sys.exit(dispatch(argv))


if __name__ == "__main__":
    main()
