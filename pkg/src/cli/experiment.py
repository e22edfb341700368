"""Experiment commands: map generation, batch runs, aggregation, renders."""

from pathlib import Path
from typing import Optional

import click
import numpy as np

from src.cli.common import config_option, exits_on_error, load_config
from src.core.config import settings
from src.core.exceptions import ExperimentError
from src.models.belief import BeliefMap
from src.models.episode import EpisodeLog
from src.models.experiment import ExperimentSpec
from src.models.scene import SceneMap, SlotLayout
from src.observability.logging_config import get_logger
from src.observability.metrics import ExperimentMetrics
from src.repositories.experiment_repository import (
    ExperimentRepository,
    load_episode_logs,
)
from src.repositories.map_repository import MapRepository
from src.services.experiment_runner import aggregate, generate_map_set, run_experiment
from src.services.policies import POLICY_NAMES
from src.services.rendering import export_heatmap, render_trajectory
from src.services.scenarios import SCENARIO_NAMES, run_scenario
from src.services.search_environment import SearchEnvironment
from src.services.selftest import run_selftest
from src.utils.correlation import make_episode_id

logger = get_logger(__name__)


@click.command("gen-maps")
@click.option("--seed", type=int, default=0, show_default=True, help="Map seed")
@click.option(
    "--out",
    type=click.Path(file_okay=False, path_type=Path),
    required=True,
    help="Directory for the map files",
)
@click.option("--per-condition", type=click.IntRange(min=1), default=10, show_default=True)
@click.option(
    "--layout",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="Slot layout JSON; defaults to the parking lot",
)
@exits_on_error
def gen_maps(seed: int, out: Path, per_condition: int, layout: Optional[Path]) -> None:
    """Generate the condition-grid map set."""
    spec = ExperimentSpec(maps_per_condition=per_condition, map_seed=seed)
    scenes = generate_map_set(
        spec.conditions(), per_condition, seed, SlotLayout.load(layout)
    )
    repository = MapRepository(out)
    for scene in scenes:
        repository.save(scene)
    logger.info("maps_written", extra={"count": len(scenes), "out": str(out)})
    click.echo(f"Wrote {len(scenes)} maps to {out}")


@click.command("run")
@click.option(
    "--policy", type=click.Choice(POLICY_NAMES), default="greedy", show_default=True
)
@click.option(
    "--maps",
    "maps_dir",
    type=click.Path(exists=True, file_okay=False, path_type=Path),
    default=None,
    help="Map directory; the default grid is generated when omitted",
)
@click.option(
    "--out",
    type=click.Path(dir_okay=False, path_type=Path),
    default=None,
    help="Metrics CSV; episode logs go beside it",
)
@click.option("--repeats", type=click.IntRange(min=1), default=None)
@click.option("--workers", type=click.IntRange(min=1), default=None)
@click.option("--seed", type=int, default=0, show_default=True, help="Episode base seed")
@click.option("--map-seed", type=int, default=0, show_default=True)
@click.option("--snapshots", is_flag=True, help="Store the posterior in every step record")
@config_option
@exits_on_error
def run(
    policy: str,
    maps_dir: Optional[Path],
    out: Optional[Path],
    repeats: Optional[int],
    workers: Optional[int],
    seed: int,
    map_seed: int,
    snapshots: bool,
    config_path: Optional[Path],
) -> None:
    """Run every (map, repeat) episode and write metrics and logs."""
    config = load_config(config_path)
    harness = config.harness
    out = out or settings.output_path / f"metrics_{policy}.csv"
    spec = ExperimentSpec(
        maps_per_condition=harness.maps_per_condition,
        repeats=repeats or harness.repeats,
        policy=policy,
        base_seed=seed,
        map_seed=map_seed,
        maps_dir=maps_dir,
        output_dir=out.parent,
        workers=workers or harness.workers,
        snapshots=snapshots,
        seconds_per_step=harness.seconds_per_step,
    )
    metrics = ExperimentMetrics()
    repository = ExperimentRepository(out)
    result = run_experiment(spec, config, metrics=metrics, repository=repository)
    if settings.prometheus_pushgateway_url:
        metrics.push(settings.prometheus_pushgateway_url)

    click.echo(
        f"{len(result.metrics)} episodes, accuracy "
        f"{result.metrics['correct'].mean():.3f} -> {repository.metrics_path}"
    )


@click.command("aggregate")
@click.argument(
    "metrics_csv", type=click.Path(exists=True, dir_okay=False, path_type=Path)
)
@click.option(
    "--out",
    type=click.Path(file_okay=False, path_type=Path),
    default=None,
    help="Directory for by_condition.csv and by_map.csv",
)
@exits_on_error
def aggregate_cmd(metrics_csv: Path, out: Optional[Path]) -> None:
    """Per-condition and per-map descriptive statistics."""
    report = aggregate(ExperimentRepository(metrics_csv).load_metrics())
    out = out or metrics_csv.parent
    out.mkdir(parents=True, exist_ok=True)
    report.by_condition.to_csv(out / "by_condition.csv", index=False, lineterminator="\n")
    report.by_map.to_csv(out / "by_map.csv", index=False, lineterminator="\n")

    for key, value in report.overall.items():
        click.echo(f"{key:>24}: {value:.4g}")
    for key, value in report.human_reference.items():
        click.echo(f"{'human ' + key:>24}: {value:.4g}")


def _find_episode(logs: list[EpisodeLog], episode: str) -> EpisodeLog:
    for log in logs:
        if make_episode_id(log.map_id, log.repeat) == episode:
            return log
    raise ExperimentError(f"Episode '{episode}' not in log")


def _find_scene(maps_dir: Path, map_id: str) -> SceneMap:
    for scene in MapRepository(maps_dir).load_all():
        if scene.map_id == map_id:
            return scene
    raise ExperimentError(f"Map '{map_id}' not found in {maps_dir}")


_log_option = click.option(
    "--log",
    "log_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    required=True,
    help="Episode log (JSON Lines)",
)
_episode_option = click.option(
    "--episode", required=True, help="Episode id, <map_id>#<repeat>"
)
_maps_option = click.option(
    "--maps",
    "maps_dir",
    type=click.Path(exists=True, file_okay=False, path_type=Path),
    default=None,
)


@click.group("render")
def render() -> None:
    """Belief heatmaps and trajectory renders."""


@render.command("heatmap")
@_log_option
@_episode_option
@click.option(
    "--step",
    type=click.IntRange(min=0),
    default=None,
    help="Defaults to the last step",
)
@_maps_option
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True)
@config_option
@exits_on_error
def render_heatmap(
    log_path: Path,
    episode: str,
    step: Optional[int],
    maps_dir: Optional[Path],
    out: Path,
    config_path: Optional[Path],
) -> None:
    """Posterior after a given step; uses the stored snapshot or replays the episode."""
    config = load_config(config_path)
    log = _find_episode(load_episode_logs(log_path), episode)
    step = log.num_steps if step is None else min(step, log.num_steps)

    record = log.steps[step - 1] if step > 0 else None
    if record is not None and record.snapshot is not None:
        probabilities = np.asarray(record.snapshot).reshape(config.grid.shape)
        belief = BeliefMap.from_probabilities(probabilities, config.grid)
    else:
        if maps_dir is None:
            raise ExperimentError("No snapshot stored; pass --maps to replay the episode")
        env = SearchEnvironment(config)
        env.reset(_find_scene(maps_dir, log.map_id), log.seed, repeat=log.repeat)
        for action in log.actions[:step]:
            env.step(action)
        belief = env.state.posterior

    path = export_heatmap(belief, out, title=f"{episode} step {step}")
    click.echo(f"Wrote {path} and {path.with_suffix('.txt')}")


@render.command("trajectory")
@_log_option
@_episode_option
@click.option(
    "--maps",
    "maps_dir",
    type=click.Path(exists=True, file_okay=False, path_type=Path),
    required=True,
)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True)
@exits_on_error
def render_trajectory_cmd(log_path: Path, episode: str, maps_dir: Path, out: Path) -> None:
    """Top-down path of one episode with a text map view."""
    log = _find_episode(load_episode_logs(log_path), episode)
    path, view = render_trajectory(log, _find_scene(maps_dir, log.map_id), out)
    click.echo(view, nl=False)
    click.echo(f"Wrote {path}")


@click.command("scenario")
@click.argument("name", type=click.Choice(SCENARIO_NAMES))
@click.option("--episodes", type=click.IntRange(min=1), default=100, show_default=True)
@click.option(
    "--policy", type=click.Choice(POLICY_NAMES), default="greedy", show_default=True
)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option(
    "--threshold",
    type=click.FloatRange(0.0, 1.0),
    default=0.5,
    show_default=True,
    help="Distractor-commit rate reported as reproduced",
)
@config_option
@exits_on_error
def scenario(
    name: str,
    episodes: int,
    policy: str,
    seed: int,
    threshold: float,
    config_path: Optional[Path],
) -> None:
    """Run an error-mode scenario and report distractor commits."""
    report = run_scenario(name, episodes, policy, load_config(config_path), seed)
    reproduced = report.distractor_commit_rate >= threshold
    verdict = "reproduced" if reproduced else "not reproduced"
    click.echo(
        f"{name}: distractor commits {report.distractor_commits}/{report.episodes} "
        f"({report.distractor_commit_rate:.2f}, {verdict}), accuracy {report.accuracy:.2f}"
    )
    for outcome, count in report.outcomes.items():
        click.echo(f"  {outcome}: {count}")


@click.command("selftest")
def selftest() -> None:
    """Run the invariant suite; exit status 1 if any check fails."""
    results = run_selftest()
    for result in results:
        mark = "PASS" if result.passed else "FAIL"
        line = f"{mark}  {result.name:<24} {result.seconds:6.2f}s"
        if result.detail:
            line += f"  {result.detail}"
        click.echo(line)
    failed = [r.name for r in results if not r.passed]
    if failed:
        raise SystemExit(1)
    click.echo(f"All {len(results)} checks passed")
