"""Experiment specification and per-episode metric rows."""

from pathlib import Path
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field

from src.models.episode import EpisodeLog, Outcome, SearchStrategy
from src.models.scene import (
    DISTRACTOR_LEVELS,
    NUM_OBJS_LEVELS,
    AngleClass,
    MapCondition,
    SceneMap,
)

# Fixed column order of the metrics CSV.
METRIC_COLUMNS = (
    "map_id",
    "angle",
    "num_objs",
    "num_distractors",
    "repeat",
    "outcome",
    "correct",
    "steps",
    "search_time_s",
    "head_turn_deg",
    "displacement_m",
    "return",
    "strategy",
)

HUMAN_REFERENCE = {"accuracy": 0.947}


class ExperimentSpec(BaseModel):
    """Condition grid, repeats, policy and seeds of one batch run."""

    angles: list[AngleClass] = Field(default_factory=lambda: list(AngleClass))
    num_objs_levels: list[int] = Field(default_factory=lambda: list(NUM_OBJS_LEVELS))
    distractor_levels: list[int] = Field(default_factory=lambda: list(DISTRACTOR_LEVELS))
    maps_per_condition: int = Field(default=10, ge=1)
    repeats: int = Field(default=12, ge=1)
    policy: str = "greedy"
    base_seed: int = 0
    map_seed: int = 0
    maps_dir: Optional[Path] = None
    output_dir: Path = Path("./output")
    workers: int = Field(default=1, ge=1)
    snapshots: bool = False
    seconds_per_step: float = Field(default=1.0, gt=0)

    def conditions(self) -> list[MapCondition]:
        """Every valid (angle, objects, distractors) cell, in grid order."""
        return [
            MapCondition(angle=angle, num_objs=n, num_distractors=d)
            for angle in self.angles
            for n in self.num_objs_levels
            for d in self.distractor_levels
            if d < n
        ]

    @property
    def num_maps(self) -> int:
        return len(self.conditions()) * self.maps_per_condition


class MetricRow(BaseModel):
    """Dependent variables of one episode."""

    model_config = ConfigDict(populate_by_name=True)

    map_id: str
    angle: AngleClass
    num_objs: int
    num_distractors: int
    repeat: int
    outcome: Outcome
    correct: bool
    steps: int
    search_time_s: float
    head_turn_deg: float
    displacement_m: float
    episode_return: float = Field(alias="return")
    strategy: SearchStrategy

    @classmethod
    def from_log(
        cls, log: EpisodeLog, scene: SceneMap, seconds_per_step: float = 1.0
    ) -> "MetricRow":
        return cls(
            map_id=log.map_id,
            angle=scene.condition.angle,
            num_objs=scene.condition.num_objs,
            num_distractors=scene.condition.num_distractors,
            repeat=log.repeat,
            outcome=log.outcome,
            correct=log.outcome is Outcome.COMMITTED_CORRECT,
            steps=log.num_steps,
            search_time_s=log.num_steps * seconds_per_step,
            head_turn_deg=log.head_turn_deg,
            displacement_m=log.displacement_m,
            episode_return=log.total_return,
            strategy=log.strategy,
        )

    def to_record(self) -> dict:
        """Flat record keyed by the CSV column names."""
        data = self.model_dump(mode="json", by_alias=True)
        return {column: data[column] for column in METRIC_COLUMNS}
