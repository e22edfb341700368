"""Procedural map generation and scene queries (visibility, rays, collisions)."""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.core.exceptions import MapGenerationError
from src.models.geometry import EgoPolar, PolarGrid, Pose, wrap_angle, world_to_ego_many
from src.models.scene import Color, MapCondition, SceneMap, SceneObject, SlotLayout
from src.observability.logging_config import get_logger

logger = get_logger(__name__)

MAX_START_ATTEMPTS = 10_000

# Rays grazing a footprint within this slack still count as hits.
TANGENT_EPS = 1e-9


@dataclass(frozen=True)
class RayMarchResult:
    """Cells in front of the first occluder along one ray."""

    azimuth_index: int
    pre_occluder_cells: list[tuple[int, int]]
    first_surface: Optional[SceneObject] = None
    hit_distance: Optional[float] = None
    surface_cell: Optional[tuple[int, int]] = None


def generate_map(
    condition: MapCondition,
    slot_layout: SlotLayout,
    seed: int,
    map_id: Optional[str] = None,
) -> SceneMap:
    """Generate a map satisfying a study condition.

    The target gets a random slot and color; ``num_distractors`` other cars
    share that color and the rest take the remaining colors. The start pose
    is resampled on cell centres until it is collision-free and the bearing
    to the target falls in the requested angle class.

    Args:
        condition: Angle class, object count and distractor count
        slot_layout: Lot extents and slot centres
        seed: RNG seed; identical inputs yield identical maps
        map_id: Identifier stored in the map; derived from the condition if omitted

    Returns:
        Validated SceneMap

    Raises:
        MapGenerationError: If there are too few slots or no start pose is found
    """
    if condition.num_objs > len(slot_layout.slots):
        raise MapGenerationError(
            f"Condition {condition.label} needs {condition.num_objs} slots, "
            f"layout has {len(slot_layout.slots)}"
        )

    rng = np.random.default_rng(seed)
    colors = list(Color)

    slot_indices = rng.choice(
        len(slot_layout.slots), size=condition.num_objs, replace=False
    )
    target_color = colors[int(rng.integers(len(colors)))]
    other_colors = [c for c in colors if c != target_color]

    placed: list[tuple[tuple[float, float], Color, bool]] = []
    for rank, slot_index in enumerate(slot_indices):
        position = slot_layout.slots[int(slot_index)]
        if rank == 0:
            placed.append((position, target_color, True))
        elif rank <= condition.num_distractors:
            placed.append((position, target_color, False))
        else:
            color = other_colors[int(rng.integers(len(other_colors)))]
            placed.append((position, color, False))

    # ids follow slot order so they do not reveal the target
    placed.sort(key=lambda item: (item[0][1], item[0][0]))
    objects = [
        SceneObject(
            id=i,
            x=position[0],
            y=position[1],
            color=color,
            is_target=is_target,
            footprint_radius=slot_layout.footprint_radius,
        )
        for i, (position, color, is_target) in enumerate(placed)
    ]
    target = next(o for o in objects if o.is_target)

    start_pose = _sample_start_pose(condition, slot_layout, objects, target, rng)

    scene = SceneMap(
        map_id=map_id or f"{condition.label}-s{seed}",
        width=slot_layout.width,
        depth=slot_layout.depth,
        slots=list(slot_layout.slots),
        objects=objects,
        start_pose=start_pose,
        condition=condition,
        seed=seed,
    )
    logger.debug(
        "map_generated",
        extra={
            "map_id": scene.map_id,
            "condition": condition.label,
            "seed": seed,
        },
    )
    return scene


def _sample_start_pose(
    condition: MapCondition,
    slot_layout: SlotLayout,
    objects: list[SceneObject],
    target: SceneObject,
    rng: np.random.Generator,
) -> Pose:
    nx = int(math.floor(slot_layout.width))
    ny = int(math.floor(slot_layout.depth))
    for _ in range(MAX_START_ATTEMPTS):
        x = int(rng.integers(nx)) + 0.5
        y = int(rng.integers(ny)) + 0.5
        heading = float(rng.integers(-180, 180))
        if any(o.distance_to((x, y)) <= o.footprint_radius for o in objects):
            continue
        bearing = math.degrees(math.atan2(target.x - x, target.y - y))
        if condition.angle.contains(wrap_angle(bearing - heading)):
            return Pose(x=x, y=y, heading=heading)
    raise MapGenerationError(
        f"No valid start pose for {condition.label} "
        f"after {MAX_START_ATTEMPTS} attempts",
        attempts=MAX_START_ATTEMPTS,
    )


def visible_set(
    scene: SceneMap,
    pose: Pose,
    fov: float = 110.0,
    merge_bearing: float = 5.0,
) -> list[tuple[SceneObject, EgoPolar]]:
    """Objects the agent can see from ``pose``.

    Objects inside the field of view are taken nearest first; an object is
    dropped when a nearer visible one lies within ``merge_bearing`` of it.

    Returns:
        (object, ego position) pairs ordered by range
    """
    if not scene.objects:
        return []
    points = np.array([o.position for o in scene.objects], dtype=float)
    ranges, thetas = world_to_ego_many(pose, points)

    candidates = [
        (float(r), o.id, o, float(t))
        for o, r, t in zip(scene.objects, ranges, thetas)
        if r > 0.0 and abs(t) <= fov / 2.0
    ]
    candidates.sort(key=lambda c: (c[0], c[1]))

    visible: list[tuple[SceneObject, EgoPolar]] = []
    for r, _, obj, theta in candidates:
        if any(
            abs(wrap_angle(theta - seen.theta)) < merge_bearing for _, seen in visible
        ):
            continue
        visible.append((obj, EgoPolar(r=r, theta=theta)))
    return visible


def ray_march(
    scene: SceneMap,
    pose: Pose,
    theta: float,
    grid: PolarGrid,
) -> RayMarchResult:
    """March outward along ego bearing ``theta`` to the first occluder.

    A ray exactly tangent to a footprint counts as a hit. Cells whose range
    centre lies strictly nearer than the hit distance are returned; the hit
    object's own cell is reported separately as ``surface_cell``.

    Args:
        scene: Scene whose cars occlude
        pose: Agent pose
        theta: Ego bearing of the ray in degrees
        grid: Polar grid defining the cells

    Returns:
        RayMarchResult for the ray's azimuth bin
    """
    azimuth_index = grid.azimuth_bin(theta)
    rad = math.radians(theta + pose.heading)
    direction = np.array([math.sin(rad), math.cos(rad)])

    hit_distance: Optional[float] = None
    first_surface: Optional[SceneObject] = None
    if scene.objects:
        centres = np.array([o.position for o in scene.objects], dtype=float)
        radii = np.array([o.footprint_radius for o in scene.objects], dtype=float)
        offsets = centres - np.array(pose.position)
        along = offsets @ direction
        c2 = np.einsum("ij,ij->i", offsets, offsets) - radii**2
        disc = along**2 - c2
        inside = c2 <= 0.0
        hits = inside | ((along > 0.0) & (disc >= -TANGENT_EPS))
        t = np.where(inside, 0.0, along - np.sqrt(np.clip(disc, 0.0, None)))
        if np.any(hits):
            t_hit = np.where(hits, t, np.inf)
            best = float(t_hit.min())
            # lowest id among equally near footprints
            tied = [o for o, tv in zip(scene.objects, t_hit) if tv == best]
            first_surface = min(tied, key=lambda o: o.id)
            hit_distance = best

    centres_r = grid.range_centers
    if hit_distance is None:
        ranges = range(grid.num_range_bins)
        surface_cell = None
    else:
        ranges = [i for i, r in enumerate(centres_r) if r < hit_distance]
        surface_range = math.hypot(
            first_surface.x - pose.x, first_surface.y - pose.y
        )
        surface_cell = (grid.range_bin(surface_range), azimuth_index)

    return RayMarchResult(
        azimuth_index=azimuth_index,
        pre_occluder_cells=[(i, azimuth_index) for i in ranges],
        first_surface=first_surface,
        hit_distance=hit_distance,
        surface_cell=surface_cell,
    )


def collides(scene: SceneMap, pose: Pose) -> bool:
    """True iff the agent stands inside a car footprint or outside the lot."""
    return scene.is_blocked(pose.position)
