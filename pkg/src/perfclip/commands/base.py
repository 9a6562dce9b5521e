"""
Command definitions shared by the CLI subcommands.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from ..config import Settings
from ..harness.resources import ExperimentResources
from ..harness.schema import ExperimentConfig

logger = logging.getLogger("perfclip.commands")


@dataclass(frozen=True)
class Option:
    """One argparse argument: flags plus add_argument keyword arguments."""

    flags: Tuple[str, ...]
    kwargs: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class Command:
    """A CLI subcommand and the options it adds to the common ones."""

    name: str
    description: str
    options: Tuple[Option, ...] = ()
    writes_outputs: bool = False


@dataclass
class CommandContext:
    """What every handler receives besides its parsed arguments."""

    config: ExperimentConfig
    resources: ExperimentResources
    settings: Settings
    out_dir: Path
    workers: Optional[int] = None
