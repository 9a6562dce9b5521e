"""
CLI subcommand definitions and handlers.
"""
from .analysis_commands import (
    calibrate_command,
    check_bounds_command,
    handle_calibrate,
    handle_check_bounds,
    handle_oracle,
    oracle_command,
)
from .base import Command, CommandContext, Option
from .experiment_commands import handle_run, handle_sweep, run_command, sweep_command

__all__ = [
    # Command definitions
    "run_command",
    "sweep_command",
    "oracle_command",
    "calibrate_command",
    "check_bounds_command",

    # Command handlers
    "handle_run",
    "handle_sweep",
    "handle_oracle",
    "handle_calibrate",
    "handle_check_bounds",

    "Command",
    "CommandContext",
    "Option",
]
