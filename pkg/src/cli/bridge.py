"""Bridge command serving the environment to external trainers."""

from pathlib import Path
from typing import Optional

import click

from src.cli.common import config_option, exits_on_error, load_config
from src.observability.logging_config import get_logger
from src.services.bridge_server import bridge_serve
from src.services.search_environment import SearchEnvironment

logger = get_logger(__name__)


@click.command("bridge")
@click.option(
    "--transport",
    type=click.Choice(["stdio", "tcp"]),
    default="stdio",
    show_default=True,
)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=click.IntRange(0, 65535), default=5555, show_default=True)
@click.option(
    "--snapshots", is_flag=True, help="Keep posterior snapshots in the episode log"
)
@config_option
@exits_on_error
def bridge(
    transport: str, host: str, port: int, snapshots: bool, config_path: Optional[Path]
) -> None:
    """Serve reset/step/close requests as line-delimited JSON."""
    env = SearchEnvironment(load_config(config_path), snapshots=snapshots)
    logger.info("bridge_starting", extra={"transport": transport, "port": port})
    try:
        bridge_serve(env, transport=transport, host=host, port=port)
    except KeyboardInterrupt:
        logger.info("bridge_interrupted")
