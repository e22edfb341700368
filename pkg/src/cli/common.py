"""Helpers shared by the CLI commands."""

import functools
import sys
from pathlib import Path
from typing import Any, Callable, Optional, TypeVar

import click

from src.core.config import DEFAULT_CONFIG_PATH, SimulationConfig, settings
from src.core.exceptions import AvSearchError
from src.observability.logging_config import get_logger, setup_logging

logger = get_logger(__name__)

F = TypeVar("F", bound=Callable[..., Any])


def init_logging(verbose: bool = False) -> None:
    """Configure logging from the runtime settings."""
    setup_logging(
        level="DEBUG" if verbose else settings.log_level,
        log_format=settings.log_format,
        loki_url=str(settings.loki_url) if settings.loki_url else None,
    )


def load_config(path: Optional[Path]) -> SimulationConfig:
    """Explicit config file, else the bundled default, else built-in defaults."""
    if path is not None:
        return SimulationConfig.load(path)
    if DEFAULT_CONFIG_PATH.exists():
        return SimulationConfig.load(DEFAULT_CONFIG_PATH)
    return SimulationConfig()


def exits_on_error(command: F) -> F:
    """Turn domain errors into a message on stderr and exit status 1."""

    @functools.wraps(command)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return command(*args, **kwargs)
        except AvSearchError as e:
            logger.error(
                "command_failed",
                extra={"error": str(e), "error_type": type(e).__name__},
            )
            click.echo(f"Error: {e}", err=True)
            sys.exit(1)

    return wrapper  # type: ignore[return-value]


config_option = click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="Simulation constants (TOML); defaults to config/default.toml",
)
