"""Quick invariant suite run by ``avsearch selftest``.

Each check raises CheckFailedError with a short reason when an invariant
does not hold. The suite is deterministic and finishes in seconds.
"""

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from src.core.config import ActionConfig, SimulationConfig
from src.core.exceptions import CheckFailedError
from src.models.belief import BeliefMap
from src.models.episode import Action, CognitiveState, Outcome
from src.models.geometry import PolarGrid, Pose, world_to_ego
from src.models.scene import (
    AngleClass,
    Color,
    MapCondition,
    SceneMap,
    SceneObject,
    SlotLayout,
)
from src.observability.logging_config import get_logger
from src.services.auditory_model import (
    ItdObservation,
    audio_likelihood,
    itd_table,
    predicted_itd,
)
from src.services.belief_service import (
    UNREACHED_FLOOR,
    fuse,
    init_uniform,
    leaky_update,
    summarize,
    transport,
)
from src.services.planner import GreedyPlanner
from src.services.policies import RandomPolicy
from src.services.scene_service import generate_map
from src.services.search_environment import SearchEnvironment, replay
from src.services.visual_model import evidence_map

logger = get_logger(__name__)


def require(condition: bool, reason: str) -> None:
    if not condition:
        raise CheckFailedError(reason)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""
    seconds: float = 0.0


def single_target_scene(
    target: tuple[float, float],
    start: Pose,
    extra: tuple[tuple[float, float, Color], ...] = (),
    map_id: str = "selftest",
) -> SceneMap:
    """Small hand-built map: one blue target plus optional other cars."""
    objects = [
        SceneObject(id=0, x=target[0], y=target[1], color=Color.BLUE, is_target=True)
    ]
    for i, (x, y, color) in enumerate(extra, start=1):
        objects.append(SceneObject(id=i, x=x, y=y, color=color))
    bearing = world_to_ego(start, target).theta
    return SceneMap(
        map_id=map_id,
        width=29.0,
        depth=13.0,
        slots=[o.position for o in objects],
        objects=objects,
        start_pose=start,
        condition=MapCondition(
            angle=AngleClass.of(bearing),
            num_objs=len(objects),
            num_distractors=sum(1 for o in objects[1:] if o.color == Color.BLUE),
        ),
    )


def oracle_scene() -> SceneMap:
    """Two-car scene used by the straight-line oracle."""
    return single_target_scene(
        target=(15.5, 9.0),
        start=Pose(x=14.5, y=6.5, heading=0.0),
        extra=((12.5, 5.5, Color.WHITE),),
        map_id="oracle",
    )


def oracle_config() -> SimulationConfig:
    return SimulationConfig(
        grid=PolarGrid.with_bins(3, 8),
        actions=ActionConfig(turn_angle=45.0),
    )


ORACLE_ACTIONS = (
    Action.TURN_RIGHT,
    Action.STAY,
    Action.TURN_LEFT,
    Action.MOVE_FORWARD,
    Action.TURN_LEFT,
    Action.STAY,
)


def straight_line_posterior(
    scene: SceneMap, config: SimulationConfig, seed: int, actions: tuple[Action, ...]
) -> list[list[float]]:
    """Posterior after ``actions`` computed with explicit loops.

    Only the instantaneous visual evidence comes from the engine. Rotation,
    the forward re-projection, accumulation, the ITD model, the Gaussian
    likelihood, fusion and the leaky update are evaluated cell by cell.
    """
    grid = config.grid
    nr, na = grid.num_range_bins, grid.num_azimuth_bins
    aud = config.auditory
    sigma = aud.itd_noise
    lam = config.visual.blend
    w = config.belief.visual_weight
    alpha = config.belief.leak
    res = grid.range_resolution
    stride = config.actions.stride
    rng = np.random.default_rng(seed)

    def itd_of(theta: float) -> float:
        if theta > 90.0:
            theta = 180.0 - theta
        elif theta < -90.0:
            theta = -180.0 - theta
        lat = math.radians(theta)
        return aud.head_radius * (lat + math.sin(lat)) / aud.speed_of_sound

    centres = [-180.0 + (j + 0.5) * grid.azimuth_resolution for j in range(na)]
    bound = itd_of(90.0) + 6.0 * sigma

    def normalize(m: list[list[float]]) -> list[list[float]]:
        total = math.fsum(v for row in m for v in row)
        return [[v / total for v in row] for row in m]

    def shift(m: list[list[float]], k: int) -> list[list[float]]:
        return [[row[(j + k) % na] for j in range(na)] for row in m]

    def push_forward(m: list[list[float]]) -> list[list[float]]:
        """Bilinear re-projection one stride ahead, floor on unreached cells."""
        moved = [[0.0] * na for _ in range(nr)]
        inflow = [[0.0] * na for _ in range(nr)]
        for i in range(nr):
            r = (i + 1) * res
            for j in range(na):
                rad = math.radians(centres[j])
                x, y = r * math.sin(rad), r * math.cos(rad) - stride
                r_new = math.hypot(x, y)
                if r_new < res / 2.0:
                    continue
                theta = (math.degrees(math.atan2(x, y)) + 180.0) % 360.0 - 180.0
                fr = min(max(r_new / res - 1.0, 0.0), nr - 1.0)
                fa = (theta + 180.0) / grid.azimuth_resolution - 0.5
                i0, a0 = math.floor(fr), math.floor(fa)
                wr, wa = fr - i0, fa - a0
                i1 = min(i0 + 1, nr - 1)
                for ti, tj, weight in (
                    (i0, a0, (1 - wr) * (1 - wa)),
                    (i0, a0 + 1, (1 - wr) * wa),
                    (i1, a0, wr * (1 - wa)),
                    (i1, a0 + 1, wr * wa),
                ):
                    moved[ti][tj % na] += weight * m[i][j]
                    inflow[ti][tj % na] += weight
        floor = UNREACHED_FLOOR / (nr * na)
        return normalize(
            [
                [v + (floor if inflow[i][j] <= 0.0 else 0.0) for j, v in enumerate(row)]
                for i, row in enumerate(moved)
            ]
        )

    uniform = 1.0 / (nr * na)
    belief = [[uniform] * na for _ in range(nr)]
    visual = [[uniform] * na for _ in range(nr)]
    pose = scene.start_pose

    def perceive(k: int) -> None:
        nonlocal belief, visual
        evidence = evidence_map(scene, pose, scene.target.color, grid, config.visual)
        e = evidence.probabilities()
        shifted = shift(visual, k)
        visual = normalize(
            [
                [(1 - lam) * shifted[i][j] + lam * e[i, j] for j in range(na)]
                for i in range(nr)
            ]
        )
        bearing = world_to_ego(pose, scene.target.position).theta
        itd = min(max(itd_of(bearing) + float(rng.normal(0.0, sigma)), -bound), bound)
        log_norm = math.log(sigma * math.sqrt(2 * math.pi))
        log_a = [
            -((itd - itd_of(c)) ** 2) / (2 * sigma**2) - log_norm
            for c in centres
        ]
        logs = [
            [
                (1 - alpha) * math.log(belief[i][j])
                + alpha * (w * math.log(visual[i][j]) + (1 - w) * log_a[j])
                for j in range(na)
            ]
            for i in range(nr)
        ]
        top = max(v for row in logs for v in row)
        belief = normalize([[math.exp(v - top) for v in row] for row in logs])

    perceive(0)
    turn = config.actions.turn_angle
    for action in actions:
        k = 0
        if action is Action.TURN_RIGHT:
            k = int(round(turn / grid.azimuth_resolution))
            pose = pose.turned(turn)
        elif action is Action.TURN_LEFT:
            k = -int(round(turn / grid.azimuth_resolution))
            pose = pose.turned(-turn)
        elif action is Action.MOVE_FORWARD:
            pose = pose.advanced(stride)
            belief = push_forward(belief)
            visual = push_forward(visual)
        belief = shift(belief, k)
        perceive(k)
    return belief


def check_itd_identities() -> None:
    cfg = SimulationConfig().auditory
    grid = PolarGrid()
    require(predicted_itd(np.array(0.0), cfg) == 0.0, "ITD(0) must be exactly 0")
    itd90 = float(predicted_itd(np.array(90.0), cfg))
    require(abs(itd90 - 655.9e-6) <= 0.1e-6, f"ITD(90) = {itd90 * 1e6:.3f} us")
    table = itd_table(grid, cfg)
    require(np.max(np.abs(table + table[::-1])) <= 1e-12, "antisymmetry")
    mirrored = predicted_itd(180.0 - grid.azimuth_centers, cfg)
    require(np.max(np.abs(table - mirrored)) <= 1e-12, "cone of confusion")


def check_normalization_fuzz(sequences: int = 200) -> None:
    config = SimulationConfig(
        grid=PolarGrid.with_bins(10, 36), actions=ActionConfig(turn_angle=30.0)
    )
    grid = config.grid
    rng = np.random.default_rng(7)
    actions = list(Action)
    for _ in range(sequences):
        belief = init_uniform(grid)
        for _ in range(5):
            visual = BeliefMap.from_probabilities(
                rng.random(grid.shape) + 1e-9, grid
            ).normalized()
            audio = audio_likelihood(
                ItdObservation(itd=float(rng.normal(0, 4e-4))), grid, config.auditory
            )
            joint = fuse(audio, visual, config.belief)
            belief = leaky_update(belief, joint, config.belief)
            require(abs(belief.probabilities().sum() - 1.0) < 1e-9, "probabilities")
            require(abs(math.exp(belief.log_total) - 1.0) < 1e-9, "leaky_update")
            action = actions[int(rng.integers(len(actions)))]
            belief = transport(belief, action, 1.0, config.actions.turn_angle)
            total = math.exp(belief.log_total)
            require(abs(total - 1.0) < 1e-9, f"transport {action.value}")


def check_brute_force_oracle() -> None:
    scene = oracle_scene()
    config = oracle_config()
    env = SearchEnvironment(config)
    env.reset(scene, seed=11)
    for action in ORACLE_ACTIONS:
        env.step(action)
    expected = np.array(straight_line_posterior(scene, config, 11, ORACLE_ACTIONS))
    diff = float(np.max(np.abs(env.state.posterior.probabilities() - expected)))
    require(diff <= 1e-9, f"max cell difference {diff:.3e}")


def front_back_ratio(true_theta: float = 150.0, turn: float = 30.0) -> float:
    """True-side over mirrored-side mass after one turn and a noiseless update."""
    config = SimulationConfig()
    grid = config.grid
    aud = config.auditory
    prior = audio_likelihood(
        ItdObservation(itd=float(predicted_itd(np.array(true_theta), aud))), grid, aud
    ).normalized()
    moved = transport(prior, Action.TURN_RIGHT, 1.0, turn)
    now = true_theta - turn
    audio = audio_likelihood(
        ItdObservation(itd=float(predicted_itd(np.array(now), aud))), grid, aud
    )
    joint = fuse(audio, init_uniform(grid), config.belief)
    posterior = leaky_update(moved, joint, config.belief)

    p = posterior.probabilities().sum(axis=0)
    centres = grid.azimuth_centers

    def window(theta: float) -> float:
        distance = np.abs((centres - theta + 180.0) % 360.0 - 180.0)
        return float(p[distance <= 10.0].sum())

    return window(now) / window(180.0 - now)


def check_front_back() -> None:
    ratio = front_back_ratio()
    require(ratio >= 10.0, f"true/mirrored mass ratio {ratio:.3g}")


def check_transport() -> None:
    grid = PolarGrid()
    rng = np.random.default_rng(3)
    belief = BeliefMap.from_probabilities(rng.random(grid.shape), grid).normalized()
    left = transport(belief, Action.TURN_LEFT, 1.0, 30.0)
    back = transport(left, Action.TURN_RIGHT, 1.0, 30.0)
    require(belief.allclose(back, atol=1e-12), "turn inverse")

    for (r, theta), (r_exp, theta_exp) in (
        ((5.0, 0.5), (4.0, 0.6)),
        ((2.0, 90.5), (2.244, 116.96)),
    ):
        p = np.zeros(grid.shape)
        p[grid.range_bin(r), grid.azimuth_bin(theta)] = 1.0
        point = BeliefMap.from_probabilities(p, grid)
        moved = transport(point, Action.MOVE_FORWARD, 1.0, 30.0)
        i, j = summarize(moved).map_cell
        require(abs(i - grid.range_bin(r_exp)) <= 1, f"range bin {i} for {r}")
        dj = abs((j - grid.azimuth_bin(theta_exp) + 180) % 360 - 180)
        require(dj <= 1, f"azimuth bin {j} for {theta}")


def reward_scenes() -> dict[str, SceneMap]:
    """Scenes for the three reward examples."""
    return {
        "commit": single_target_scene(
            target=(13.5, 4.0), start=Pose(x=13.3, y=1.5, heading=0.0), map_id="commit"
        ),
        "collision": single_target_scene(
            target=(13.5, 4.0),
            start=Pose(x=13.5, y=2.5, heading=0.0),
            map_id="collision",
        ),
    }


def check_reward_arithmetic() -> None:
    config = SimulationConfig(noiseless=True)
    scenes = reward_scenes()

    env = SearchEnvironment(config)
    env.reset(scenes["commit"], seed=0)
    result = env.step(Action.COMMIT)
    outcome = result.outcome
    require(outcome is Outcome.COMMITTED_CORRECT, f"commit outcome {outcome}")
    require(abs(result.reward - 9.9) < 1e-12, f"commit reward {result.reward}")

    env.reset(scenes["collision"], seed=0)
    result = env.step(Action.MOVE_FORWARD)
    require(result.outcome is Outcome.COLLISION and result.done, "collision outcome")
    require(abs(result.reward + 5.4) < 1e-12, f"collision reward {result.reward}")

    env.reset(scenes["commit"], seed=0)
    before = env.pose
    result = env.step(Action.STAY)
    require(abs(result.reward + 0.1) < 1e-12 and env.pose == before, "stay")


def check_environment_contract(episodes: int = 5) -> None:
    config = SimulationConfig()
    layout = SlotLayout.load()
    policy = RandomPolicy()
    for k in range(episodes):
        scene = generate_map(
            MapCondition(angle=AngleClass.SIDE, num_objs=7, num_distractors=2),
            layout,
            seed=k,
        )
        env = SearchEnvironment(config)
        rng = np.random.default_rng(k)
        state = env.reset(scene, seed=100 + k)
        done = False
        while not done:
            state, _, done, _ = env.step(policy.decide(state, rng))
        log = env.log
        require(log.num_steps <= config.reward.max_steps, "episode overran")
        require(log.outcome is not None, "episode ended without outcome")
        outcomes = sum(1 for s in log.steps if s.outcome is not None)
        require(outcomes == 1, f"{outcomes} steps carry an outcome")
        again = replay(log, scene, config)
        require(again.pose == env.pose, "replayed pose differs")
        require(
            np.array_equal(
                again.state.posterior.log_values, env.state.posterior.log_values
            ),
            "replayed posterior differs",
        )


def check_planner(states: int = 100) -> None:
    config = SimulationConfig(grid=PolarGrid.with_bins(10, 36))
    grid = config.grid
    planner = GreedyPlanner(config)

    p = np.zeros(grid.shape)
    p[4, 20] = 1.0
    one_hot = BeliefMap.from_probabilities(p, grid).normalized()
    state = CognitiveState.initial(one_hot, summarize(one_hot), 4)
    action = planner.decide(state, np.random.default_rng(0))
    require(action is Action.COMMIT, f"one-hot posterior chose {action.value}")

    scaled_config = config.model_copy(update={"reward": config.reward.scaled(7.0)})
    scaled = GreedyPlanner(scaled_config)
    rng = np.random.default_rng(1)
    for k in range(states):
        p = rng.random(grid.shape) ** 8
        belief = BeliefMap.from_probabilities(p, grid).normalized()
        state = CognitiveState.initial(belief, summarize(belief), 4)
        a = planner.decide(state, np.random.default_rng(k))
        b = scaled.decide(state, np.random.default_rng(k))
        require(a is b, f"scaling changed {a.value} to {b.value}")


def check_generation(seeds: int = 5) -> None:
    layout = SlotLayout.load()
    for angle in AngleClass:
        for n in (5, 7, 12):
            for d in (0, 2, 4):
                condition = MapCondition(angle=angle, num_objs=n, num_distractors=d)
                for seed in range(seeds):
                    scene = generate_map(condition, layout, seed)
                    label = f"{condition.label} seed {seed}"
                    require(len(scene.objects) == n, f"{label}: object count")
                    require(len(scene.distractors) == d, f"{label}: distractors")
                    start, target = scene.start_pose, scene.target.position
                    bearing = world_to_ego(start, target).theta
                    require(angle.contains(bearing), f"{label}: angle class")


CHECKS: dict[str, Callable[[], None]] = {
    "itd_identities": check_itd_identities,
    "normalization_fuzz": check_normalization_fuzz,
    "brute_force_oracle": check_brute_force_oracle,
    "front_back_resolution": check_front_back,
    "transport": check_transport,
    "reward_arithmetic": check_reward_arithmetic,
    "environment_contract": check_environment_contract,
    "planner_rationality": check_planner,
    "map_generation": check_generation,
}


def run_selftest() -> list[CheckResult]:
    """Run every check; failures are collected, never raised."""
    results = []
    for name, check in CHECKS.items():
        started = time.perf_counter()
        try:
            check()
            passed, detail = True, ""
        except CheckFailedError as e:
            passed, detail = False, str(e)
        except Exception as e:  # noqa: BLE001
            logger.exception("selftest_check_crashed", extra={"check": name})
            passed, detail = False, f"{type(e).__name__}: {e}"
        results.append(CheckResult(name, passed, detail, time.perf_counter() - started))
    return results
