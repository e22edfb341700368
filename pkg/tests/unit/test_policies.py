"""Tests for the greedy planner and the baseline policies."""

import numpy as np
import pytest

from src.core.config import PlannerConfig, SimulationConfig
from src.models.belief import BeliefMap
from src.models.episode import Action, CognitiveState
from src.models.geometry import PolarGrid
from src.services.belief_service import init_uniform, mass_within, summarize
from src.services.planner import TIE_BREAK_ORDER, GreedyPlanner
from src.services.policies import (
    POLICY_NAMES,
    HeuristicPolicy,
    RandomPolicy,
    build_policy,
)
from src.services.search_environment import SearchEnvironment
from tests.conftest import point_mass


def state_of(belief: BeliefMap) -> CognitiveState:
    return CognitiveState.initial(belief, summarize(belief), 4)


def two_modes(grid: PolarGrid, first: tuple[float, float], second: tuple[float, float]):
    p = np.zeros(grid.shape)
    p[grid.range_bin(first[0]), grid.azimuth_bin(first[1])] = 0.5
    p[grid.range_bin(second[0]), grid.azimuth_bin(second[1])] = 0.5
    return BeliefMap.from_probabilities(p, grid)


class TestGreedyPlanner:
    def test_one_hot_commits(self, small_config):
        planner = GreedyPlanner(small_config)
        state = state_of(point_mass(small_config.grid, 5.0, 20.0))
        assert planner.decide(state, np.random.default_rng(0)) is Action.COMMIT

    def test_one_hot_commits_with_horizon_one(self, small_config):
        config = small_config.model_copy(update={"planner": PlannerConfig(horizon=1)})
        state = state_of(point_mass(config.grid, 3.0, -60.0))
        action = GreedyPlanner(config).decide(state, np.random.default_rng(0))
        assert action is Action.COMMIT

    def test_front_back_ambiguity_turns(self, config):
        # mirror pair about the interaural axis, both outside the field of view
        state = state_of(two_modes(config.grid, (5.0, 70.5), (5.0, 109.5)))
        action = GreedyPlanner(config).decide(state, np.random.default_rng(0))
        assert action.is_turn

    def test_split_belief_does_not_commit(self, small_config):
        state = state_of(two_modes(small_config.grid, (5.0, 75.0), (5.0, 105.0)))
        planner = GreedyPlanner(small_config)
        values = planner.action_values(state, np.random.default_rng(1))
        assert set(values) == set(Action)
        assert max(values, key=values.get) is not Action.COMMIT

    def test_commit_value_of_one_hot(self, small_config):
        state = state_of(point_mass(small_config.grid, 5.0, 20.0))
        planner = GreedyPlanner(small_config)
        values = planner.action_values(state, np.random.default_rng(0))
        assert values[Action.COMMIT] == pytest.approx(1.0 - 0.01, abs=1e-9)

    def test_uniform_belief_commits_only_when_effort_is_expensive(self, small_config):
        state = state_of(init_uniform(small_config.grid))
        rng = np.random.default_rng(0)
        assert GreedyPlanner(small_config).decide(state, rng) is not Action.COMMIT

        reward = small_config.reward.model_copy(
            update={
                "timestep_penalty": 10.0,
                "turn_penalty": 10.0,
                "forward_penalty": 10.0,
            }
        )
        costly = GreedyPlanner(small_config.model_copy(update={"reward": reward}))
        assert costly.decide(state, np.random.default_rng(0)) is Action.COMMIT

    def test_scale_invariance(self, small_config):
        planner = GreedyPlanner(small_config)
        scaled = GreedyPlanner(
            small_config.model_copy(update={"reward": small_config.reward.scaled(13.0)})
        )
        rng = np.random.default_rng(7)
        for k in range(20):
            probs = rng.random(small_config.grid.shape) ** 12
            state = state_of(BeliefMap.from_probabilities(probs, small_config.grid))
            a = planner.decide(state, np.random.default_rng(k))
            b = scaled.decide(state, np.random.default_rng(k))
            assert a is b

    def test_deterministic_given_rng(self, small_config):
        rng = np.random.default_rng(3)
        probs = rng.random(small_config.grid.shape) ** 6
        state = state_of(BeliefMap.from_probabilities(probs, small_config.grid))
        planner = GreedyPlanner(small_config)
        first = planner.action_values(state, np.random.default_rng(9))
        second = planner.action_values(state, np.random.default_rng(9))
        assert first == second

    def test_tie_break_order(self):
        assert TIE_BREAK_ORDER[0] is Action.COMMIT
        assert TIE_BREAK_ORDER[1] is Action.STAY
        assert TIE_BREAK_ORDER[-1] is Action.MOVE_FORWARD


class TestHeuristicPolicy:
    def test_turns_towards_estimate(self, small_grid):
        policy = HeuristicPolicy()
        rng = np.random.default_rng(0)
        right = state_of(point_mass(small_grid, 5.0, 45.0))
        left = state_of(point_mass(small_grid, 5.0, -45.0))
        assert policy.decide(right, rng) is Action.TURN_RIGHT
        assert policy.decide(left, rng) is Action.TURN_LEFT

    def test_walks_then_commits(self, small_grid):
        policy = HeuristicPolicy()
        rng = np.random.default_rng(0)
        far = state_of(point_mass(small_grid, 6.0, 5.0))
        near = state_of(point_mass(small_grid, 2.0, 5.0))
        assert policy.decide(far, rng) is Action.MOVE_FORWARD
        assert policy.decide(near, rng) is Action.COMMIT


class TestRandomPolicy:
    def test_commit_rate(self, small_grid):
        policy = RandomPolicy()
        state = state_of(init_uniform(small_grid))
        rng = np.random.default_rng(0)
        actions = [policy.decide(state, rng) for _ in range(4000)]
        share = sum(a is Action.COMMIT for a in actions) / len(actions)
        assert 0.035 < share < 0.065
        assert set(actions) == set(Action)


def test_build_policy():
    for name in POLICY_NAMES:
        assert build_policy(name).name == name
    with pytest.raises(ValueError):
        build_policy("ppo")


class TestPlannerPrediction:
    @pytest.fixture
    def settled(self, ahead_scene):
        config = SimulationConfig(noiseless=True)
        env = SearchEnvironment(config)
        env.reset(ahead_scene, seed=0)
        for _ in range(4):
            env.step(Action.STAY)
        return env

    def test_state_carries_visual_memory(self, settled):
        assert settled.state.visual is settled.visual_likelihood

    def test_commits_once_visible_target_settles(self, settled):
        planner = GreedyPlanner(settled.config)
        values = planner.action_values(settled.state, np.random.default_rng(0))
        assert values[Action.COMMIT] > values[Action.STAY]
        assert planner.decide(settled.state, np.random.default_rng(0)) is Action.COMMIT

    def test_predicted_hit_mass_tracks_outcome(self, settled):
        planner = GreedyPlanner(settled.config)
        predicted = planner.expected_hit_mass(
            settled.state, Action.STAY, np.random.default_rng(0)
        )
        state = settled.step(Action.STAY).state
        tolerance = settled.config.commit.tolerance
        realized = mass_within(state.posterior, state.summary.map_cell, tolerance)
        assert predicted == pytest.approx(realized, abs=0.05)

    def test_commit_has_no_successor(self, settled):
        planner = GreedyPlanner(settled.config)
        with pytest.raises(ValueError):
            planner.expected_hit_mass(
                settled.state, Action.COMMIT, np.random.default_rng(0)
            )
