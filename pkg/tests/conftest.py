"""Shared fixtures."""

import numpy as np
import pytest

from src.core.config import SimulationConfig
from src.models.belief import BeliefMap
from src.models.geometry import PolarGrid, Pose
from src.models.scene import AngleClass, MapCondition, SceneMap, SlotLayout
from src.services.scene_service import generate_map
from src.services.selftest import single_target_scene


@pytest.fixture
def config() -> SimulationConfig:
    return SimulationConfig()


@pytest.fixture
def small_grid() -> PolarGrid:
    """10 rings of 1 m by 36 azimuth bins of 10 degrees."""
    return PolarGrid.with_bins(10, 36)


@pytest.fixture
def small_config(small_grid: PolarGrid) -> SimulationConfig:
    return SimulationConfig(grid=small_grid)


@pytest.fixture
def layout() -> SlotLayout:
    return SlotLayout.load()


@pytest.fixture
def side_scene(layout: SlotLayout) -> SceneMap:
    condition = MapCondition(angle=AngleClass.SIDE, num_objs=7, num_distractors=2)
    return generate_map(condition, layout, seed=3, map_id="side-7-2-00")


@pytest.fixture
def ahead_scene() -> SceneMap:
    """Blue target 2.5 m ahead, slightly to the right."""
    return single_target_scene(
        target=(13.5, 4.0), start=Pose(x=13.3, y=1.5, heading=0.0), map_id="ahead"
    )


@pytest.fixture
def blocked_scene() -> SceneMap:
    """One forward step from the start runs into the target."""
    return single_target_scene(
        target=(13.5, 4.0), start=Pose(x=13.5, y=2.5, heading=0.0), map_id="blocked"
    )


def point_mass(grid: PolarGrid, r: float, theta: float) -> BeliefMap:
    p = np.zeros(grid.shape)
    p[grid.range_bin(r), grid.azimuth_bin(theta)] = 1.0
    return BeliefMap.from_probabilities(p, grid)
