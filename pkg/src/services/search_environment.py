"""Search POMDP: world transitions, perception, rewards and termination."""

from typing import NamedTuple, Optional, TypeVar

import numpy as np

from src.core.config import SimulationConfig
from src.core.exceptions import EpisodeError
from src.models.belief import BeliefMap
from src.models.episode import (
    Action,
    CognitiveState,
    CommitVerdict,
    EpisodeLog,
    Outcome,
    StepRecord,
)
from src.models.geometry import EgoPolar, Pose, ego_to_world, world_to_ego
from src.models.scene import SceneMap
from src.observability.logging_config import get_logger
from src.services.auditory_model import audio_likelihood, sample_itd
from src.services.belief_service import (
    fuse,
    init_uniform,
    leaky_update,
    summarize,
    transport,
    transport_forward,
)
from src.services.scene_service import collides
from src.services.visual_model import accumulate, evidence_map

logger = get_logger(__name__)

# Distances closer than this are treated as equal when judging commits.
TIE_TOLERANCE = 1e-9

T = TypeVar("T")


def heading_delta(action: Optional[Action], turn_angle: float) -> float:
    """Signed heading change of an action; right turns are positive."""
    if action is Action.TURN_RIGHT:
        return turn_angle
    if action is Action.TURN_LEFT:
        return -turn_angle
    return 0.0


class StepResult(NamedTuple):
    state: CognitiveState
    reward: float
    done: bool
    outcome: Optional[Outcome]


def judge_commit(
    scene: SceneMap, pose: Pose, estimate: EgoPolar, tolerance: float
) -> CommitVerdict:
    """Decide whether a committed estimate designates the target.

    The estimate is projected into the world; it is correct when the
    nearest car is the target and lies within ``tolerance`` meters.
    Equidistant cars resolve to the lowest id and set ``tie``.
    """
    point = ego_to_world(pose, estimate)
    distances = {o.id: o.distance_to(point) for o in scene.objects}
    best = min(distances.values())
    nearest = sorted(i for i, d in distances.items() if d - best <= TIE_TOLERANCE)
    nearest_id = nearest[0]
    target = scene.target
    distance_to_target = distances[target.id]
    return CommitVerdict(
        correct=nearest_id == target.id and distance_to_target <= tolerance,
        estimate=estimate,
        estimate_world=point,
        nearest_object_id=nearest_id,
        distance_to_target=distance_to_target,
        tie=len(nearest) > 1,
    )


class SearchEnvironment:
    """One episode at a time of audiovisual search on a static map.

    Within a step the belief is first transported with the action, then new
    auditory and visual evidence is drawn and folded in.
    """

    def __init__(
        self, config: Optional[SimulationConfig] = None, snapshots: bool = False
    ):
        """Initialize environment.

        Args:
            config: Simulation constants (defaults when omitted)
            snapshots: Store the full posterior in every step record
        """
        self.config = config or SimulationConfig()
        self.snapshots = snapshots
        self._scene: Optional[SceneMap] = None
        self._rng: Optional[np.random.Generator] = None
        self._pose: Optional[Pose] = None
        self._posterior: Optional[BeliefMap] = None
        self._visual: Optional[BeliefMap] = None
        self._state: Optional[CognitiveState] = None
        self._log: Optional[EpisodeLog] = None
        self._done = False
        self._last_itd: Optional[float] = None

    @property
    def scene(self) -> SceneMap:
        return self._require(self._scene)

    @property
    def pose(self) -> Pose:
        return self._require(self._pose)

    @property
    def state(self) -> CognitiveState:
        return self._require(self._state)

    @property
    def log(self) -> EpisodeLog:
        return self._require(self._log)

    @property
    def visual_likelihood(self) -> BeliefMap:
        return self._require(self._visual)

    @property
    def done(self) -> bool:
        return self._done

    def _require(self, value: Optional[T]) -> T:
        if value is None:
            raise EpisodeError("Environment has not been reset")
        return value

    def reset(
        self,
        scene: SceneMap,
        seed: int,
        repeat: int = 0,
        policy: str = "external",
    ) -> CognitiveState:
        """Start an episode at the map's start pose.

        The belief starts uniform and one perception update is applied
        before the first state is returned.

        Args:
            scene: Validated map
            seed: Seed for this episode's observation noise
            repeat: Repeat index recorded in the log
            policy: Policy name recorded in the log

        Returns:
            Initial CognitiveState
        """
        cfg = self.config
        rng = np.random.default_rng(seed)
        self._scene = scene
        self._rng = rng
        self._pose = scene.start_pose
        self._posterior = init_uniform(cfg.grid)
        self._visual = init_uniform(cfg.grid)
        self._done = False
        self._perceive(None)

        summary = summarize(self._posterior)
        self._state = CognitiveState.initial(
            self._posterior, summary, cfg.actions.history_length, visual=self._visual
        )
        self._log = EpisodeLog(
            map_id=scene.map_id,
            repeat=repeat,
            seed=seed,
            policy=policy,
            start_pose=scene.start_pose,
            turn_angle=cfg.actions.turn_angle,
            wrong_commit_penalty=cfg.reward.wrong_commit_penalty,
            initial_summary=summary,
        )
        logger.debug(
            "episode_reset",
            extra={"map_id": scene.map_id, "seed": seed, "entropy": summary.entropy},
        )
        return self._state

    def step(self, action: Action) -> StepResult:
        """Apply one action.

        Returns:
            StepResult with the new state, reward, done flag and outcome

        Raises:
            EpisodeError: If the episode is over or was never started
        """
        if self._state is None:
            raise EpisodeError("Environment has not been reset")
        if self._done:
            raise EpisodeError("Episode already finished; call reset()")

        cfg = self.config
        rewards = cfg.reward
        reward = -rewards.timestep_penalty
        outcome: Optional[Outcome] = None
        verdict: Optional[CommitVerdict] = None
        self._last_itd = None

        if action is Action.COMMIT:
            estimate = self._state.summary.map_estimate
            verdict = judge_commit(self.scene, self.pose, estimate, cfg.commit.tolerance)
            if verdict.correct:
                reward += rewards.task_reward
                outcome = Outcome.COMMITTED_CORRECT
            else:
                reward -= rewards.wrong_commit_penalty
                outcome = Outcome.COMMITTED_WRONG
        elif action is Action.MOVE_FORWARD:
            reward -= rewards.forward_penalty
            moved = self.pose.advanced(cfg.actions.stride)
            if collides(self.scene, moved):
                reward -= rewards.collision_penalty
                outcome = Outcome.COLLISION
            else:
                self._pose = moved
                self._perceive(action)
        elif action.is_turn:
            reward -= rewards.turn_penalty
            self._pose = self.pose.turned(heading_delta(action, cfg.actions.turn_angle))
            self._perceive(action)
        else:
            self._perceive(action)

        summary = (
            self._state.summary
            if self._posterior is self._state.posterior
            else summarize(self._posterior)
        )
        self._state = self._state.advanced(
            self._posterior, summary, action, visual=self._visual
        )
        if outcome is None and self._state.elapsed_steps >= rewards.max_steps:
            outcome = Outcome.TIMEOUT
        self._done = outcome is not None

        self.log.steps.append(
            StepRecord(
                step=self._state.elapsed_steps,
                action=action,
                pose=self.pose,
                reward=reward,
                itd=self._last_itd,
                summary=summary,
                done=self._done,
                outcome=outcome,
                snapshot=self._posterior.probabilities().ravel().tolist()
                if self.snapshots
                else None,
            )
        )
        if self._done:
            self.log.outcome = outcome
            self.log.verdict = verdict
            logger.debug(
                "episode_done",
                extra={
                    "map_id": self.scene.map_id,
                    "outcome": outcome.value,
                    "steps": self._state.elapsed_steps,
                },
            )
        return StepResult(self._state, reward, self._done, outcome)

    def _perceive(self, action: Optional[Action]) -> None:
        """Transport both maps with ``action`` and fold in fresh evidence."""
        cfg = self.config
        scene = self.scene
        delta_psi = heading_delta(action, cfg.actions.turn_angle)
        visual_prior = self._visual
        if action is Action.MOVE_FORWARD:
            visual_prior = transport_forward(visual_prior, cfg.actions.stride)
        prior = self._posterior
        if action is not None:
            prior = transport(prior, action, cfg.actions.stride, cfg.actions.turn_angle)

        target = scene.target
        evidence = evidence_map(scene, self.pose, target.color, cfg.grid, cfg.visual)
        self._visual = accumulate(visual_prior, delta_psi, evidence, cfg.visual)

        bearing = world_to_ego(self.pose, target.position).theta
        observation = sample_itd(
            bearing, cfg.auditory, self._rng, noise=0.0 if cfg.noiseless else None
        )
        self._last_itd = observation.itd
        audio = audio_likelihood(observation, cfg.grid, cfg.auditory)
        joint = fuse(audio, self._visual, cfg.belief)
        self._posterior = leaky_update(prior, joint, cfg.belief)


def replay(
    log: EpisodeLog, scene: SceneMap, config: Optional[SimulationConfig] = None
) -> SearchEnvironment:
    """Re-run a logged action sequence under the logged seed.

    Returns:
        Environment positioned after the last logged action
    """
    env = SearchEnvironment(config)
    env.reset(scene, log.seed, repeat=log.repeat, policy=log.policy)
    for action in log.actions:
        env.step(action)
    return env
