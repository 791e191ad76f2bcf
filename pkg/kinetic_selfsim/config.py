import logging
import os
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

from dotenv import dotenv_values, find_dotenv, load_dotenv
from pydantic import BaseModel, Field, ValidationError
from pythonjsonlogger import jsonlogger

from kinetic_selfsim.errors import ConfigError
from kinetic_selfsim.models import ExperimentConfig

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
PACKAGE_LOGGER = "kinetic_selfsim"
LIST_KEYS = {"t_samples"}


class Settings(BaseModel):
    threads: int = Field(default_factory=lambda: os.cpu_count() or 1, ge=1)
    log_level: str = "INFO"
    log_format: str = "text"
    out_dir: Path = Path("results")


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """
    Read process-wide settings from the environment

    A ``.env`` file in the working directory is loaded first; variables already
    present in the environment win.

    Returns:
        Settings built from KINETIC_SELFSIM_* variables
    """
    load_dotenv(find_dotenv(usecwd=True))
    values: Dict[str, Any] = {}
    threads = os.environ.get("KINETIC_SELFSIM_THREADS")
    if threads:
        values["threads"] = int(threads)
    if os.environ.get("KINETIC_SELFSIM_LOG_LEVEL"):
        values["log_level"] = os.environ["KINETIC_SELFSIM_LOG_LEVEL"]
    if os.environ.get("KINETIC_SELFSIM_LOG_FORMAT"):
        values["log_format"] = os.environ["KINETIC_SELFSIM_LOG_FORMAT"]
    if os.environ.get("KINETIC_SELFSIM_OUT"):
        values["out_dir"] = Path(os.environ["KINETIC_SELFSIM_OUT"])
    return Settings(**values)


def configure_logging(level: str = "INFO", fmt: str = "text") -> logging.Logger:
    """Install a single handler on the package logger, plain text or JSON."""
    package_logger = logging.getLogger(PACKAGE_LOGGER)
    for handler in list(package_logger.handlers):
        package_logger.removeHandler(handler)

    handler = logging.StreamHandler()
    if fmt == "json":
        handler.setFormatter(jsonlogger.JsonFormatter(LOG_FORMAT))
    else:
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
    package_logger.addHandler(handler)
    package_logger.setLevel(level.upper())
    package_logger.propagate = False
    return package_logger


def _parse_list(raw: str) -> list:
    return [float(item) for item in raw.replace(";", ",").split(",") if item.strip()]


def load_experiment_config(
    path: Optional[Path] = None, overrides: Optional[Mapping[str, Any]] = None
) -> ExperimentConfig:
    """
    Merge a flat KEY=VALUE config file with explicit overrides and validate

    Args:
        path: Optional config file; keys are ExperimentConfig field names, any case
        overrides: Values given on the command line; None entries are ignored

    Returns:
        Validated ExperimentConfig

    Raises:
        ConfigError: if the file is missing or the merged values do not validate
    """
    merged: Dict[str, Any] = {}
    if path is not None:
        if not Path(path).is_file():
            raise ConfigError(f"config file not found: {path}")
        for key, raw in dotenv_values(path).items():
            if raw is None:
                continue
            key = key.strip().lower()
            merged[key] = _parse_list(raw) if key in LIST_KEYS else raw

    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value

    try:
        return ExperimentConfig(**merged)
    except ValidationError as e:
        logger.error(f"Invalid experiment configuration: {e}")
        raise ConfigError(str(e)) from e
