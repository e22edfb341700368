"""Hand-crafted maps reproducing characteristic error modes."""

from collections import Counter
from typing import Optional

import numpy as np
from pydantic import BaseModel

from src.core.config import SimulationConfig
from src.models.episode import Outcome
from src.models.geometry import Pose
from src.models.scene import (
    AngleClass,
    Color,
    MapCondition,
    SceneMap,
    SceneObject,
    SlotLayout,
)
from src.observability.logging_config import get_logger
from src.services.experiment_runner import EpisodeTask, run_episode

logger = get_logger(__name__)

# Agent stands in front of the near row, facing north along x = 13.5.
_START = Pose(x=13.5, y=1.5, heading=0.0)

_LAYOUTS: dict[str, list[tuple[float, float, Color, bool]]] = {
    # Target hidden straight ahead behind a same-colored car.
    "occlusion": [
        (13.5, 4.0, Color.BLUE, False),
        (13.5, 9.0, Color.BLUE, True),
        (7.5, 9.0, Color.WHITE, False),
    ],
    # Same-colored car nearer than the target on the other side.
    "closer_distractor": [
        (11.5, 4.0, Color.BLUE, False),
        (17.5, 9.0, Color.BLUE, True),
        (5.5, 9.0, Color.WHITE, False),
    ],
    # Same-colored car farther than the target.
    "farther_distractor": [
        (11.5, 4.0, Color.BLUE, True),
        (17.5, 9.0, Color.BLUE, False),
        (5.5, 9.0, Color.WHITE, False),
    ],
}

SCENARIO_NAMES = tuple(_LAYOUTS)


def scenario_map(name: str, layout: Optional[SlotLayout] = None) -> SceneMap:
    """Build a named scenario on the parking-lot layout.

    Raises:
        ValueError: If the scenario name is unknown
    """
    if name not in _LAYOUTS:
        raise ValueError(f"Unknown scenario '{name}', expected one of {SCENARIO_NAMES}")
    layout = layout or SlotLayout.load()
    cars = _LAYOUTS[name]
    target_color = next(color for _, _, color, is_target in cars if is_target)
    objects = [
        SceneObject(
            id=i,
            x=x,
            y=y,
            color=color,
            is_target=is_target,
            footprint_radius=layout.footprint_radius,
        )
        for i, (x, y, color, is_target) in enumerate(cars)
    ]
    return SceneMap(
        map_id=f"scenario-{name}",
        width=layout.width,
        depth=layout.depth,
        slots=list(layout.slots),
        objects=objects,
        start_pose=_START,
        condition=MapCondition(
            angle=AngleClass.FRONT,
            num_objs=len(objects),
            num_distractors=sum(
                1 for o in objects if not o.is_target and o.color == target_color
            ),
        ),
    )


class ScenarioReport(BaseModel):
    """Outcome counts of repeated episodes on one scenario map."""

    scenario: str
    policy: str
    episodes: int
    outcomes: dict[str, int]
    distractor_commits: int

    @property
    def distractor_commit_rate(self) -> float:
        return self.distractor_commits / self.episodes if self.episodes else 0.0

    @property
    def accuracy(self) -> float:
        correct = self.outcomes.get(Outcome.COMMITTED_CORRECT.value, 0)
        return correct / self.episodes if self.episodes else 0.0


def run_scenario(
    name: str,
    episodes: int = 100,
    policy: str = "greedy",
    config: Optional[SimulationConfig] = None,
    seed: int = 0,
) -> ScenarioReport:
    """Run seeded episodes on a scenario map and count distractor commits."""
    config = config or SimulationConfig()
    scene = scenario_map(name)
    distractor_ids = {o.id for o in scene.distractors}

    outcomes: Counter[str] = Counter()
    distractor_commits = 0
    for episode in range(episodes):
        sequence = np.random.SeedSequence([seed, episode])
        env_seed, policy_seed = sequence.generate_state(2)
        log = run_episode(
            EpisodeTask(
                scene=scene,
                config=config,
                policy=policy,
                env_seed=int(env_seed),
                policy_seed=int(policy_seed),
                repeat=episode,
            )
        )
        outcomes[log.outcome.value] += 1
        if log.verdict is not None and log.verdict.nearest_object_id in distractor_ids:
            distractor_commits += 1

    report = ScenarioReport(
        scenario=name,
        policy=policy,
        episodes=episodes,
        outcomes=dict(sorted(outcomes.items())),
        distractor_commits=distractor_commits,
    )
    logger.info(
        "scenario_finished",
        extra={
            "scenario": name,
            "episodes": episodes,
            "distractor_commit_rate": report.distractor_commit_rate,
        },
    )
    return report
