"""Batch experiments: map sets, episode dispatch and descriptive aggregation."""

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np
import pandas as pd

from src.core.config import SimulationConfig
from src.core.exceptions import ExperimentError
from src.models.episode import EpisodeLog, SearchStrategy
from src.models.experiment import (
    HUMAN_REFERENCE,
    METRIC_COLUMNS,
    ExperimentSpec,
    MetricRow,
)
from src.models.scene import MapCondition, SceneMap, SlotLayout
from src.observability.logging_config import get_logger
from src.observability.metrics import ExperimentMetrics
from src.repositories.experiment_repository import ExperimentRepository
from src.repositories.map_repository import MapRepository
from src.services.policies import build_policy
from src.services.scene_service import generate_map
from src.services.search_environment import SearchEnvironment
from src.utils.correlation import EpisodeContext, make_episode_id

logger = get_logger(__name__)

CONDITION_KEYS = ["angle", "num_objs", "num_distractors"]


def derive_seed(*entropy: int) -> int:
    """Independent 32-bit seed from a tuple of integers."""
    return int(np.random.SeedSequence(list(entropy)).generate_state(1)[0])


def generate_map_set(
    conditions: Iterable[MapCondition],
    maps_per_condition: int,
    seed: int,
    layout: Optional[SlotLayout] = None,
) -> list[SceneMap]:
    """Generate ``maps_per_condition`` maps for every condition.

    Map ids are ``<angle>-<objs>-<distractors>-<index>`` so file order
    follows the condition grid.
    """
    layout = layout or SlotLayout.load()
    scenes = []
    for c_index, condition in enumerate(conditions):
        for m_index in range(maps_per_condition):
            scenes.append(
                generate_map(
                    condition,
                    layout,
                    derive_seed(seed, c_index, m_index),
                    map_id=f"{condition.label}-{m_index:02d}",
                )
            )
    return scenes


@dataclass(frozen=True)
class EpisodeTask:
    """Everything a worker needs to run one episode."""

    scene: SceneMap
    config: SimulationConfig
    policy: str
    env_seed: int
    policy_seed: int
    repeat: int
    snapshots: bool = False


def run_episode(task: EpisodeTask) -> EpisodeLog:
    """Run one episode to termination with a fresh environment and policy."""
    with EpisodeContext(make_episode_id(task.scene.map_id, task.repeat)):
        env = SearchEnvironment(task.config, snapshots=task.snapshots)
        policy = build_policy(task.policy, task.config)
        rng = np.random.default_rng(task.policy_seed)

        state = env.reset(
            task.scene, task.env_seed, repeat=task.repeat, policy=policy.name
        )
        done = False
        while not done:
            state, _, done, _ = env.step(policy.decide(state, rng))

        log = env.log
        logger.debug(
            "episode_finished",
            extra={
                "outcome": log.outcome.value,
                "steps": log.num_steps,
                "return": log.total_return,
            },
        )
        return log


def build_tasks(
    scenes: list[SceneMap], spec: ExperimentSpec, config: SimulationConfig
) -> list[EpisodeTask]:
    """One task per (map, repeat), in map-major order."""
    tasks = []
    for map_index, scene in enumerate(scenes):
        for repeat in range(spec.repeats):
            env_seed, policy_seed = (
                np.random.SeedSequence([spec.base_seed, map_index, repeat])
                .generate_state(2)
                .tolist()
            )
            tasks.append(
                EpisodeTask(
                    scene=scene,
                    config=config,
                    policy=spec.policy,
                    env_seed=int(env_seed),
                    policy_seed=int(policy_seed),
                    repeat=repeat,
                    snapshots=spec.snapshots,
                )
            )
    return tasks


@dataclass
class ExperimentResult:
    """Metrics table and logs of a run, in (map, repeat) order."""

    metrics: pd.DataFrame
    logs: list[EpisodeLog] = field(default_factory=list)
    scenes: list[SceneMap] = field(default_factory=list)


def metrics_frame(rows: Iterable[MetricRow]) -> pd.DataFrame:
    return pd.DataFrame([r.to_record() for r in rows], columns=list(METRIC_COLUMNS))


def run_experiment(
    spec: ExperimentSpec,
    config: Optional[SimulationConfig] = None,
    scenes: Optional[list[SceneMap]] = None,
    metrics: Optional[ExperimentMetrics] = None,
    repository: Optional[ExperimentRepository] = None,
) -> ExperimentResult:
    """Run every (map, repeat) episode of an experiment.

    Maps come from ``scenes``, else ``spec.maps_dir``, else are generated
    from the condition grid. Episodes run on a process pool when
    ``spec.workers > 1``; results keep (map, repeat) order either way.

    Args:
        spec: Experiment specification
        config: Simulation constants
        scenes: Explicit map list
        metrics: Prometheus metrics to update
        repository: Where to write metrics and logs; nothing is written if omitted

    Returns:
        ExperimentResult

    Raises:
        ExperimentError: If no maps are available or outputs cannot be written
    """
    config = config or SimulationConfig()
    if repository is not None:
        repository.ensure_writable()

    if scenes is None:
        if spec.maps_dir is not None:
            scenes = MapRepository(spec.maps_dir).load_all()
        else:
            scenes = generate_map_set(
                spec.conditions(), spec.maps_per_condition, spec.map_seed
            )
    if not scenes:
        raise ExperimentError("No maps to run")

    tasks = build_tasks(scenes, spec, config)
    logger.info(
        "experiment_started",
        extra={
            "policy": spec.policy,
            "maps": len(scenes),
            "repeats": spec.repeats,
            "episodes": len(tasks),
            "workers": spec.workers,
        },
    )
    started = time.perf_counter()
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as executor:
            logs = list(executor.map(run_episode, tasks, chunksize=spec.repeats))
    else:
        logs = [run_episode(task) for task in tasks]
    elapsed = time.perf_counter() - started

    rows = [
        MetricRow.from_log(log, task.scene, spec.seconds_per_step)
        for log, task in zip(logs, tasks)
    ]
    table = metrics_frame(rows)

    if metrics is not None:
        for log in logs:
            metrics.record_episode(log.outcome.value, log.num_steps)
        metrics.experiment_seconds.set(elapsed)

    if repository is not None:
        repository.save_metrics(table)
        repository.save_logs(logs)

    logger.info(
        "experiment_finished",
        extra={
            "episodes": len(logs),
            "accuracy": float(table["correct"].mean()),
            "seconds": round(elapsed, 3),
        },
    )
    return ExperimentResult(metrics=table, logs=logs, scenes=scenes)


@dataclass
class AggregateReport:
    """Descriptive statistics of a metrics table."""

    by_condition: pd.DataFrame
    by_map: pd.DataFrame
    overall: dict[str, float]
    human_reference: dict[str, float] = field(default_factory=dict)


def _describe(groups) -> pd.DataFrame:
    table = groups.agg(
        episodes=("correct", "size"),
        accuracy=("correct", "mean"),
        median_steps=("steps", "median"),
        mean_steps=("steps", "mean"),
        median_search_time_s=("search_time_s", "median"),
        mean_search_time_s=("search_time_s", "mean"),
        median_head_turn_deg=("head_turn_deg", "median"),
        mean_head_turn_deg=("head_turn_deg", "mean"),
        median_displacement_m=("displacement_m", "median"),
        mean_displacement_m=("displacement_m", "mean"),
        mean_return=("return", "mean"),
    )
    for strategy in SearchStrategy:
        table[f"share_{strategy.value}"] = groups["strategy"].apply(
            lambda s, v=strategy.value: float((s == v).mean())
        )
    return table


def aggregate(
    metrics: pd.DataFrame,
    human_reference: Optional[dict[str, float]] = None,
) -> AggregateReport:
    """Per-condition and per-map medians and means with accuracy.

    Args:
        metrics: Table with the metric columns
        human_reference: Reference values reported side by side; the overall
            human accuracy is used when omitted

    Returns:
        AggregateReport

    Raises:
        ExperimentError: If the table is empty
    """
    if metrics.empty:
        raise ExperimentError("Cannot aggregate an empty metrics table")
    metrics = metrics.assign(correct=metrics["correct"].astype(bool))

    by_condition = _describe(metrics.groupby(CONDITION_KEYS, sort=True)).reset_index()
    by_map = _describe(
        metrics.groupby(["map_id"] + CONDITION_KEYS, sort=True)
    ).reset_index()
    overall = {
        "episodes": float(len(metrics)),
        "accuracy": float(metrics["correct"].mean()),
        "median_steps": float(metrics["steps"].median()),
        "median_head_turn_deg": float(metrics["head_turn_deg"].median()),
        "median_displacement_m": float(metrics["displacement_m"].median()),
    }
    reference = dict(HUMAN_REFERENCE if human_reference is None else human_reference)
    return AggregateReport(
        by_condition=by_condition,
        by_map=by_map,
        overall=overall,
        human_reference=reference,
    )
