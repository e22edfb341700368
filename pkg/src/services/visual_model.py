"""Visual evidence, line-of-sight discounting and egocentric accumulation."""

import numpy as np

from src.core.config import VisualConfig
from src.core.exceptions import BeliefError, GeometryError
from src.models.belief import BeliefMap
from src.models.geometry import PolarGrid, Pose
from src.models.scene import Color, SceneMap
from src.services.scene_service import ray_march, visible_set


def fov_azimuth_mask(grid: PolarGrid, fov: float) -> np.ndarray:
    """Azimuth bins whose centre lies inside the field of view."""
    return np.abs(grid.azimuth_centers) <= fov / 2.0


def similarity(color: Color, target_color: Color, cfg: VisualConfig) -> float:
    return cfg.match_similarity if color == target_color else cfg.mismatch_similarity


def evidence_weights(
    scene: SceneMap,
    pose: Pose,
    target_color: Color,
    grid: PolarGrid,
    cfg: VisualConfig,
) -> np.ndarray:
    """Unnormalized visual evidence, shape (range bins, azimuth bins).

    Every cell starts at the floor. Each visible car adds a peak of
    ``visible_weight * similarity / n_visible`` at its cell. Cells in front
    of the first occluder on every in-view ray are multiplied by
    ``1 - exclusion_decay``, as is the occluder's own cell and everything
    before it when its color does not match the target.
    """
    weights = np.full(grid.shape, cfg.evidence_floor)

    visible = visible_set(scene, pose, cfg.fov, cfg.merge_bearing)
    share = cfg.visible_weight / max(len(visible), 1)
    for obj, ep in visible:
        i, j = grid.cell_of(ep)
        weights[i, j] += share * similarity(obj.color, target_color, cfg)

    discounted = np.zeros(grid.shape, dtype=bool)
    for j in np.flatnonzero(fov_azimuth_mask(grid, cfg.fov)):
        ray = ray_march(scene, pose, float(grid.azimuth_centers[j]), grid)
        for cell in ray.pre_occluder_cells:
            discounted[cell] = True
        if ray.first_surface is not None and ray.first_surface.color != target_color:
            surface_range = ray.surface_cell[0]
            discounted[: surface_range + 1, j] = True

    weights[discounted] *= 1.0 - cfg.exclusion_decay
    return weights


def evidence_map(
    scene: SceneMap,
    pose: Pose,
    target_color: Color,
    grid: PolarGrid,
    cfg: VisualConfig,
) -> BeliefMap:
    """Normalized instantaneous visual evidence E_visual."""
    weights = evidence_weights(scene, pose, target_color, grid, cfg)
    return BeliefMap(np.log(weights), grid).normalized()


def rotate_shift(prev: BeliefMap, delta_psi: float) -> BeliefMap:
    """Re-express a map after the head turns by ``delta_psi`` degrees.

    The value at new azimuth theta is the old value at theta + delta_psi,
    an exact circular permutation of the azimuth axis.

    Raises:
        BeliefError: If ``delta_psi`` is not a whole number of azimuth bins
    """
    try:
        steps = prev.grid.rotation_bins(delta_psi)
    except GeometryError as e:
        raise BeliefError(str(e)) from e
    if steps % prev.grid.num_azimuth_bins == 0:
        return prev
    return BeliefMap(np.roll(prev.log_values, -steps, axis=1), prev.grid)


def accumulate(
    prev: BeliefMap,
    delta_psi: float,
    evidence: BeliefMap,
    cfg: VisualConfig,
) -> BeliefMap:
    """Exponential moving average of visual evidence in the egocentric frame.

    Args:
        prev: Previous visual likelihood (normalized)
        delta_psi: Heading change since ``prev`` was formed
        evidence: Current evidence map (normalized)
        cfg: Visual constants; ``blend`` weights the new evidence

    Returns:
        Normalized visual likelihood
    """
    prev.require_same_grid(evidence)
    shifted = rotate_shift(prev, delta_psi)
    mixed = (1.0 - cfg.blend) * shifted.probabilities()
    mixed += cfg.blend * evidence.probabilities()
    return BeliefMap.from_probabilities(mixed, prev.grid).normalized()
