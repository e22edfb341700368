"""Episode data models: actions, outcomes, policy observations and logs."""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field

from src.models.belief import BeliefMap, BeliefSummary
from src.models.geometry import EgoPolar, Point, Pose


class Action(str, Enum):
    """Embodied actions."""

    TURN_LEFT = "turn_left"
    TURN_RIGHT = "turn_right"
    MOVE_FORWARD = "move_forward"
    STAY = "stay"
    COMMIT = "commit"

    @property
    def code(self) -> int:
        return ACTION_CODES[self]

    @property
    def is_turn(self) -> bool:
        return self in (Action.TURN_LEFT, Action.TURN_RIGHT)


# 0 is reserved for the padding entry of the action history.
NULL_ACTION_CODE = 0
ACTION_CODES: dict[Action, int] = {
    Action.TURN_LEFT: 1,
    Action.TURN_RIGHT: 2,
    Action.MOVE_FORWARD: 3,
    Action.STAY: 4,
    Action.COMMIT: 5,
}


def action_code(action: Optional[Action]) -> int:
    return NULL_ACTION_CODE if action is None else action.code


class Outcome(str, Enum):
    """Terminal outcome of an episode."""

    COMMITTED_CORRECT = "committed_correct"
    COMMITTED_WRONG = "committed_wrong"
    COLLISION = "collision"
    TIMEOUT = "timeout"


class SearchStrategy(str, Enum):
    """Coarse label of how an episode searched."""

    EARLY_COMMIT = "early_commit"
    HEAD_TURNS = "head_turns"
    LOCOMOTION = "locomotion"


class CommitVerdict(BaseModel):
    """Judgement of a commit against the true scene."""

    model_config = ConfigDict(frozen=True)

    correct: bool
    estimate: EgoPolar
    estimate_world: Point
    nearest_object_id: int
    distance_to_target: float
    tie: bool = Field(
        default=False, description="Nearest object was tied and broken by id"
    )


# Observation field order served to external trainers.
OBSERVATION_FIELDS = (
    "est_theta",
    "theta_uncertainty",
    "est_r",
    "r_uncertainty",
    "last_actions",
    "posterior",
    "posterior_entropy",
    "elapsed_steps",
)


@dataclass(frozen=True)
class CognitiveState:
    """Everything a policy may see: the agent's own maps and history, never the world.

    ``visual`` is the accumulated visual likelihood the posterior was fused
    with; it is absent for states built directly from a posterior.
    """

    posterior: BeliefMap
    summary: BeliefSummary
    last_actions: tuple[Optional[Action], ...]
    estimate_history: tuple[Optional[EgoPolar], ...]
    elapsed_steps: int
    visual: Optional[BeliefMap] = None

    @classmethod
    def initial(
        cls,
        posterior: BeliefMap,
        summary: BeliefSummary,
        history_length: int,
        visual: Optional[BeliefMap] = None,
    ) -> "CognitiveState":
        padding: tuple[None, ...] = (None,) * (history_length - 1)
        return cls(
            posterior=posterior,
            summary=summary,
            last_actions=(None,) * history_length,
            estimate_history=padding + (summary.map_estimate,),
            elapsed_steps=0,
            visual=visual,
        )

    def advanced(
        self,
        posterior: BeliefMap,
        summary: BeliefSummary,
        action: Action,
        visual: Optional[BeliefMap] = None,
    ) -> "CognitiveState":
        return CognitiveState(
            posterior=posterior,
            summary=summary,
            last_actions=self.last_actions[1:] + (action,),
            estimate_history=self.estimate_history[1:] + (summary.map_estimate,),
            elapsed_steps=self.elapsed_steps + 1,
            visual=visual,
        )

    @property
    def history_length(self) -> int:
        return len(self.last_actions)

    def to_observation(self) -> dict[str, Any]:
        """Flatten into the named observation fields, oldest history entry first.

        Padded history slots read as 0.
        """
        return {
            "est_theta": [0.0 if e is None else e.theta for e in self.estimate_history],
            "theta_uncertainty": self.summary.theta_uncertainty,
            "est_r": [0.0 if e is None else e.r for e in self.estimate_history],
            "r_uncertainty": self.summary.r_uncertainty,
            "last_actions": [action_code(a) for a in self.last_actions],
            "posterior": self.posterior.probabilities().ravel().tolist(),
            "posterior_entropy": self.summary.entropy,
            "elapsed_steps": self.elapsed_steps,
        }


class StepRecord(BaseModel):
    """One environment transition."""

    step: int = Field(ge=1)
    action: Action
    pose: Pose
    reward: float
    itd: Optional[float] = None
    summary: BeliefSummary
    done: bool = False
    outcome: Optional[Outcome] = None
    snapshot: Optional[list[float]] = None


class EpisodeLog(BaseModel):
    """Ordered record of an episode with derived totals."""

    map_id: str
    repeat: int = 0
    seed: int
    policy: str
    start_pose: Pose
    turn_angle: float = 30.0
    wrong_commit_penalty: float
    initial_summary: BeliefSummary
    steps: list[StepRecord] = Field(default_factory=list)
    outcome: Optional[Outcome] = None
    verdict: Optional[CommitVerdict] = None

    @property
    def actions(self) -> list[Action]:
        return [s.action for s in self.steps]

    @property
    def num_steps(self) -> int:
        return len(self.steps)

    @property
    def total_return(self) -> float:
        return math.fsum(s.reward for s in self.steps)

    @property
    def num_turns(self) -> int:
        return sum(1 for a in self.actions if a.is_turn)

    @property
    def head_turn_deg(self) -> float:
        return self.turn_angle * self.num_turns

    @property
    def final_pose(self) -> Pose:
        return self.steps[-1].pose if self.steps else self.start_pose

    @property
    def displacement_m(self) -> float:
        end = self.final_pose
        return math.hypot(end.x - self.start_pose.x, end.y - self.start_pose.y)

    @property
    def strategy(self) -> SearchStrategy:
        if any(a is Action.MOVE_FORWARD for a in self.actions):
            return SearchStrategy.LOCOMOTION
        if self.num_turns:
            return SearchStrategy.HEAD_TURNS
        return SearchStrategy.EARLY_COMMIT
