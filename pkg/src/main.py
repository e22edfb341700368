"""Command-line entry point: ``avsearch <command>``."""

import click

from src.cli.bridge import bridge
from src.cli.common import init_logging
from src.cli.experiment import (
    aggregate_cmd,
    gen_maps,
    render,
    run,
    scenario,
    selftest,
)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Debug logging")
def cli(verbose: bool) -> None:
    """Embodied audiovisual search simulation."""
    init_logging(verbose)


cli.add_command(gen_maps)
cli.add_command(run)
cli.add_command(aggregate_cmd)
cli.add_command(render)
cli.add_command(scenario)
cli.add_command(bridge)
cli.add_command(selftest)


if __name__ == "__main__":
    cli()
