"""Tests for belief maps, fusion, the leaky update, transport and summaries."""

import math

import numpy as np
import pytest

from src.core.config import BeliefConfig
from src.core.exceptions import BeliefError
from src.models.belief import BeliefMap
from src.models.episode import Action
from src.models.geometry import PolarGrid
from src.services.belief_service import (
    UNREACHED_FLOOR,
    forward_operator,
    fuse,
    init_uniform,
    leaky_update,
    mass_within,
    summarize,
    transport,
    transport_forward,
)
from tests.conftest import point_mass


class TestBeliefMap:
    def test_uniform_is_normalized(self):
        b = init_uniform(PolarGrid())
        assert b.probabilities().sum() == pytest.approx(1.0)
        assert b.log_total == pytest.approx(0.0, abs=1e-12)

    def test_values_are_read_only(self, small_grid):
        b = init_uniform(small_grid)
        with pytest.raises(ValueError):
            b.log_values[0, 0] = 0.0

    def test_rejects_non_finite(self, small_grid):
        values = np.zeros(small_grid.shape)
        values[0, 0] = np.nan
        with pytest.raises(BeliefError):
            BeliefMap(values, small_grid)

    def test_rejects_wrong_shape(self, small_grid):
        with pytest.raises(BeliefError):
            BeliefMap(np.zeros((3, 3)), small_grid)

    def test_rejects_negative_probabilities(self, small_grid):
        p = np.ones(small_grid.shape)
        p[1, 1] = -0.5
        with pytest.raises(BeliefError):
            BeliefMap.from_probabilities(p, small_grid)

    def test_grid_mismatch(self, small_grid):
        with pytest.raises(BeliefError):
            init_uniform(small_grid).allclose(init_uniform(PolarGrid()))


class TestFusion:
    def test_weighted_log_linear(self, small_grid):
        rng = np.random.default_rng(1)
        audio = BeliefMap(rng.normal(size=small_grid.shape), small_grid)
        visual = BeliefMap(rng.normal(size=small_grid.shape), small_grid)
        joint = fuse(audio, visual, BeliefConfig())
        expected = 0.7 * visual.log_values + 0.3 * audio.log_values
        assert np.allclose(joint.log_values, expected)

    def test_fuse_matches_scalar_evaluation(self):
        grid = PolarGrid.with_bins(3, 8)
        rng = np.random.default_rng(11)
        audio = BeliefMap(rng.normal(scale=4.0, size=grid.shape), grid)
        visual = BeliefMap(rng.normal(scale=4.0, size=grid.shape), grid)
        cfg = BeliefConfig(visual_weight=0.35)
        joint = fuse(audio, visual, cfg).log_values
        for i in range(3):
            for j in range(8):
                a = float(audio.log_values[i, j])
                v = float(visual.log_values[i, j])
                assert abs(joint[i, j] - (0.35 * v + 0.65 * a)) <= 1e-12

    def test_uniform_visual_keeps_audio_argmax(self):
        grid = PolarGrid.with_bins(3, 8)
        rng = np.random.default_rng(12)
        audio = BeliefMap(rng.normal(size=grid.shape), grid)
        joint = fuse(audio, init_uniform(grid), BeliefConfig())
        assert np.argmax(joint.log_values) == np.argmax(audio.log_values)

    def test_fuse_rejects_grid_mismatch(self, small_grid):
        with pytest.raises(BeliefError):
            fuse(init_uniform(small_grid), init_uniform(PolarGrid()), BeliefConfig())

    def test_leaky_update_normalizes(self, small_grid):
        rng = np.random.default_rng(2)
        prior = BeliefMap.from_probabilities(rng.random(small_grid.shape), small_grid)
        joint = BeliefMap(rng.normal(scale=30.0, size=small_grid.shape), small_grid)
        post = leaky_update(prior.normalized(), joint, BeliefConfig())
        assert post.probabilities().sum() == pytest.approx(1.0, abs=1e-12)
        assert math.exp(post.log_total) == pytest.approx(1.0, abs=1e-12)

    def test_full_leak_ignores_prior(self, small_grid):
        rng = np.random.default_rng(3)
        prior = BeliefMap.from_probabilities(rng.random(small_grid.shape), small_grid)
        joint = BeliefMap(rng.normal(size=small_grid.shape), small_grid)
        post = leaky_update(prior, joint, BeliefConfig(leak=1.0))
        assert post.allclose(joint.normalized())

    def test_zero_leak_keeps_prior(self, small_grid):
        rng = np.random.default_rng(5)
        prior = BeliefMap.from_probabilities(rng.random(small_grid.shape), small_grid)
        prior = prior.normalized()
        joint = BeliefMap(rng.normal(scale=10.0, size=small_grid.shape), small_grid)
        post = leaky_update(prior, joint, BeliefConfig(leak=0.0))
        assert post.allclose(prior)

    def test_repeated_unimodal_evidence_narrows_azimuth(self):
        grid = PolarGrid.with_bins(3, 8)
        bump = np.cos(np.deg2rad(grid.azimuth_centers - 22.5))
        joint = BeliefMap(np.broadcast_to(2.0 * bump, grid.shape).copy(), grid)
        cfg = BeliefConfig()
        b = init_uniform(grid)
        spreads = []
        for _ in range(5):
            b = leaky_update(b, joint, cfg)
            spreads.append(summarize(b).theta_uncertainty)
        assert np.all(np.diff(spreads) <= 1e-12)
        assert spreads[-1] < spreads[0]

    def test_fuzzed_sequences_stay_normalized(self, small_grid):
        rng = np.random.default_rng(4)
        cfg = BeliefConfig()
        b = init_uniform(small_grid)
        for _ in range(300):
            joint = BeliefMap(rng.normal(scale=5.0, size=small_grid.shape), small_grid)
            b = leaky_update(b, joint, cfg)
            action = list(Action)[int(rng.integers(5))]
            b = transport(b, action, 1.0, 30.0)
            assert abs(b.probabilities().sum() - 1.0) < 1e-9
            assert abs(math.exp(b.log_total) - 1.0) < 1e-9


class TestTransport:
    def test_turns_are_inverse(self):
        grid = PolarGrid()
        rng = np.random.default_rng(0)
        b = BeliefMap.from_probabilities(rng.random(grid.shape), grid).normalized()
        there = transport(b, Action.TURN_LEFT, 1.0, 30.0)
        back = transport(there, Action.TURN_RIGHT, 1.0, 30.0)
        assert back.allclose(b, atol=1e-12)

    def test_turn_right_moves_mass_left(self):
        grid = PolarGrid()
        b = transport(point_mass(grid, 3.0, 20.5), Action.TURN_RIGHT, 1.0, 30.0)
        assert summarize(b).map_cell == (grid.range_bin(3.0), grid.azimuth_bin(-9.5))

    def test_stay_and_commit_are_identity(self, small_grid):
        b = init_uniform(small_grid)
        assert transport(b, Action.STAY, 1.0, 30.0) is b
        assert transport(b, Action.COMMIT, 1.0, 30.0) is b

    def test_forward_point_mass_ahead(self):
        grid = PolarGrid()
        moved = transport(point_mass(grid, 5.0, 0.5), Action.MOVE_FORWARD, 1.0, 30.0)
        assert summarize(moved).map_cell == (grid.range_bin(4.0), grid.azimuth_bin(0.6))

    def test_forward_point_mass_to_the_side(self):
        grid = PolarGrid()
        moved = transport(point_mass(grid, 2.0, 90.5), Action.MOVE_FORWARD, 1.0, 30.0)
        i, j = summarize(moved).map_cell
        # (2 m, 90.5 deg) seen from one meter further on: (2.244 m, 116.96 deg)
        assert abs(i - grid.range_bin(math.sqrt(5.0))) <= 1
        assert abs(j - grid.azimuth_bin(116.6)) <= 1
        assert (i, j) == (grid.range_bin(2.244), grid.azimuth_bin(116.96))

    def test_forward_operator_columns(self):
        grid = PolarGrid()
        operator, unreached = forward_operator(grid, 1.0)
        column_sums = np.asarray(operator.sum(axis=0)).ravel()
        dropped = grid.azimuth_bin(0.5)  # ring 0, straight ahead
        assert column_sums[dropped] == 0.0
        kept = np.delete(column_sums, dropped)
        assert np.allclose(kept[kept > 0], 1.0)
        assert not unreached.any()

    def test_unreached_cells_get_the_floor(self):
        # a stride longer than the grid pushes everything past the first ring
        grid = PolarGrid.with_bins(3, 36)
        _, unreached = forward_operator(grid, 5.0)
        assert unreached[: grid.num_azimuth_bins].all()
        moved = transport_forward(BeliefMap.uniform(grid), 5.0).probabilities()
        floor = UNREACHED_FLOOR / grid.num_cells
        expected = np.full(grid.num_azimuth_bins, floor)
        assert moved[0] == pytest.approx(expected, rel=1e-6)
        assert moved[1:].sum() == pytest.approx(1.0)

    def test_forward_keeps_normalization(self):
        grid = PolarGrid()
        rng = np.random.default_rng(6)
        b = BeliefMap.from_probabilities(rng.random(grid.shape), grid).normalized()
        moved = transport(b, Action.MOVE_FORWARD, 1.0, 30.0)
        assert moved.probabilities().sum() == pytest.approx(1.0, abs=1e-12)


class TestSummary:
    def test_point_mass(self):
        grid = PolarGrid()
        s = summarize(point_mass(grid, 7.0, -45.5))
        assert s.map_cell == (6, grid.azimuth_bin(-45.5))
        assert s.map_estimate.r == pytest.approx(7.0)
        assert s.map_estimate.theta == pytest.approx(-45.5)
        assert s.entropy == pytest.approx(0.0, abs=1e-9)
        assert s.theta_uncertainty == pytest.approx(0.0, abs=1e-4)
        assert s.r_uncertainty == pytest.approx(0.0, abs=1e-6)

    def test_uniform(self, small_grid):
        s = summarize(init_uniform(small_grid))
        assert s.map_cell == (0, 0)
        assert s.entropy == pytest.approx(math.log(small_grid.num_cells))
        assert s.mean_resultant_length < 1e-9

    def test_ties_break_to_lowest_range_then_azimuth(self, small_grid):
        p = np.full(small_grid.shape, 1e-6)
        p[3, 7] = p[3, 2] = p[5, 1] = 1.0
        s = summarize(BeliefMap.from_probabilities(p, small_grid))
        assert s.map_cell == (3, 2)

    def test_circular_spread_of_two_lobes(self):
        grid = PolarGrid()
        p = np.zeros(grid.shape)
        p[4, grid.azimuth_bin(-10.5)] = 0.5
        p[4, grid.azimuth_bin(10.5)] = 0.5
        s = summarize(BeliefMap.from_probabilities(p, grid))
        resultant = math.cos(math.radians(10.5))
        expected = math.degrees(math.sqrt(-2.0 * math.log(resultant)))
        assert s.theta_uncertainty == pytest.approx(expected, rel=1e-6)

    def test_mass_within(self):
        grid = PolarGrid()
        p = np.zeros(grid.shape)
        p[4, grid.azimuth_bin(0.5)] = 0.6
        p[4, grid.azimuth_bin(1.5)] = 0.3
        p[20, grid.azimuth_bin(90.5)] = 0.1
        b = BeliefMap.from_probabilities(p, grid)
        cell = (4, grid.azimuth_bin(0.5))
        assert mass_within(b, cell, 1.5) == pytest.approx(0.9)
        assert mass_within(b, cell, 100.0) == pytest.approx(1.0)
