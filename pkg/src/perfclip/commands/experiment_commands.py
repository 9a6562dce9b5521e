"""
Experiment commands: Monte-Carlo runs and parameter sweeps.
"""
import logging
from typing import Any, Dict

from ..harness.output import emit_results, write_json, write_table
from ..harness.resources import ExperimentResources
from ..harness.runner import run_trials
from ..harness.schema import with_updates
from ..harness.sweeps import bias_sweep, privacy_tradeoff_sweep
from .base import Command, CommandContext, Option

logger = logging.getLogger("perfclip.commands.experiment")

run_command = Command(
    name="run",
    description="Run n_trials trajectories per algorithm and write one CSV per algorithm plus metadata",
    options=(
        Option(("--bounds",), {"action": "store_true", "help": "Add the bound column where the bound applies"}),
    ),
    writes_outputs=True,
)

sweep_command = Command(
    name="sweep",
    description="Sweep the sensitivity beta (bias) or the privacy budget epsilon (privacy)",
    options=(
        Option(("kind",), {"choices": ["bias", "privacy"], "help": "Which sweep to run"}),
        Option(("--grid",), {"type": float, "nargs": "+", "help": "Grid values replacing the configured grid"}),
    ),
    writes_outputs=True,
)


def handle_run(context: CommandContext, arguments: Dict[str, Any]) -> Dict[str, Any]:
    """
    Handle the run command.

    Args:
        context: Command context with the experiment resources
        arguments: Parsed arguments (bounds)

    Returns:
        Summary per algorithm and the files written
    """
    config, resources = context.config, context.resources
    if arguments.get("bounds") and not config.bounds.overlay:
        config = with_updates(config, {"bounds.overlay": True})
        resources = ExperimentResources(config)

    run = run_trials(config, context.settings, context.workers, resources=resources)
    written = emit_results(run, context.out_dir)
    return {
        "seed": config.experiment.seed,
        "algorithms": {name: m.summary() for name, m in run.metrics.items()},
        "files": [str(path) for path in written],
    }


def handle_sweep(context: CommandContext, arguments: Dict[str, Any]) -> Dict[str, Any]:
    """
    Handle the sweep command.

    Args:
        context: Command context
        arguments: Parsed arguments (kind, grid)

    Returns:
        Sweep rows and the table written
    """
    kind = arguments["kind"]
    grid = arguments.get("grid")
    if kind == "bias":
        rows = bias_sweep(context.config, grid, context.settings, context.workers)
    else:
        rows = privacy_tradeoff_sweep(context.config, grid, context.settings, context.workers)
    table = [row.as_dict() for row in rows]
    path = write_table(table, context.out_dir / f"{kind}_sweep.csv")
    write_json(context.config.resolved(), context.out_dir / "config.json")
    logger.info(f"{kind} sweep finished with {len(rows)} rows")
    return {"sweep": kind, "rows": table, "files": [str(path)]}
