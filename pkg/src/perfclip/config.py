"""
Configuration management for the perfclip simulator.
"""

import os
import logging
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

# Load environment variables from .env file if present
dotenv_path = Path(os.path.dirname(os.path.dirname(os.path.dirname(__file__)))) / '.env'
load_dotenv(dotenv_path=dotenv_path)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

logger = logging.getLogger("perfclip.config")


class Settings(BaseSettings):
    """Process-level settings read from PERFCLIP_* environment variables."""

    model_config = SettingsConfigDict(env_prefix="PERFCLIP_", extra="ignore")

    LOG_LEVEL: str = "INFO"
    LOG_FILE: Optional[str] = None

    # Storage settings
    OUTPUT_DIR: Path = Path("./results")

    # Trial execution
    WORKERS: int = Field(default=1, ge=1)
    CHUNK_SIZE: int = Field(default=32, ge=1)  # trials vectorised together
    STREAM_BLOCK: int = Field(default=1024, ge=1)  # random draws buffered per trial


def configure_logging(settings: Settings, verbosity: int = 0) -> None:
    """
    Configure root logging from settings.

    Args:
        settings: Process settings carrying LOG_LEVEL and LOG_FILE
        verbosity: +1 per -v flag (DEBUG), -1 for -q (WARNING)
    """
    level = getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO)
    if verbosity > 0:
        level = logging.DEBUG
    elif verbosity < 0:
        level = logging.WARNING

    handlers = [logging.StreamHandler()]
    if settings.LOG_FILE:
        handlers.append(logging.FileHandler(settings.LOG_FILE, mode="a"))

    logging.basicConfig(level=level, format=LOG_FORMAT, handlers=handlers, force=True)
    logger.debug(f"Logging configured at {logging.getLevelName(level)}")
