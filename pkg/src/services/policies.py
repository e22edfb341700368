"""Policy interface and baseline policies."""

from typing import Optional, Protocol

import numpy as np

from src.core.config import SimulationConfig
from src.models.episode import Action, CognitiveState
from src.services.planner import GreedyPlanner

COMMIT_PROBABILITY = 0.05
NON_COMMIT_ACTIONS = (
    Action.TURN_LEFT,
    Action.TURN_RIGHT,
    Action.MOVE_FORWARD,
    Action.STAY,
)


class Policy(Protocol):
    """Maps a CognitiveState to an action; never sees the world."""

    name: str

    def decide(self, state: CognitiveState, rng: np.random.Generator) -> Action:
        ...


class HeuristicPolicy:
    """Face the estimate, walk up to it, then commit."""

    name = "heuristic"

    def __init__(self, align_within: float = 15.0, approach_to: float = 2.0):
        self.align_within = align_within
        self.approach_to = approach_to

    def decide(self, state: CognitiveState, rng: np.random.Generator) -> Action:
        estimate = state.summary.map_estimate
        if abs(estimate.theta) >= self.align_within:
            return Action.TURN_RIGHT if estimate.theta > 0 else Action.TURN_LEFT
        if estimate.r > self.approach_to:
            return Action.MOVE_FORWARD
        return Action.COMMIT


class RandomPolicy:
    """Commit with a small fixed probability, otherwise explore uniformly."""

    name = "random"

    def __init__(self, commit_probability: float = COMMIT_PROBABILITY):
        self.commit_probability = commit_probability

    def decide(self, state: CognitiveState, rng: np.random.Generator) -> Action:
        return random_action(rng, self.commit_probability)


def random_action(
    rng: np.random.Generator, commit_probability: float = COMMIT_PROBABILITY
) -> Action:
    if rng.random() < commit_probability:
        return Action.COMMIT
    return NON_COMMIT_ACTIONS[int(rng.integers(len(NON_COMMIT_ACTIONS)))]


POLICY_NAMES = ("greedy", "heuristic", "random")


def build_policy(name: str, config: Optional[SimulationConfig] = None) -> Policy:
    """Instantiate a policy by name.

    Raises:
        ValueError: If ``name`` is not a known policy
    """
    if name == "greedy":
        return GreedyPlanner(config)
    if name == "heuristic":
        return HeuristicPolicy()
    if name == "random":
        return RandomPolicy()
    raise ValueError(f"Unknown policy '{name}', expected one of {POLICY_NAMES}")
