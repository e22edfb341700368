"""Static scene data models: parked cars, slot layouts and search maps."""

import json
import math
from enum import Enum
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.models.geometry import Point, Pose, world_to_ego

DEFAULT_LAYOUT_PATH = (
    Path(__file__).resolve().parents[2] / "config" / "layouts" / "parking_lot.json"
)

# Levels used by the study design.
NUM_OBJS_LEVELS = (5, 7, 12)
DISTRACTOR_LEVELS = (0, 2, 4)

MAP_FORMAT_VERSION = "1"


class Color(str, Enum):
    """Car colors."""

    BLUE = "blue"
    BLACK = "black"
    WHITE = "white"


class AngleClass(str, Enum):
    """Start-to-target bearing classes.

    front covers [-55, 55], side covers (55, 125] on either side and back
    covers the rest of the circle.
    """

    FRONT = "front"
    SIDE = "side"
    BACK = "back"

    @classmethod
    def of(cls, theta: float) -> "AngleClass":
        magnitude = abs(theta)
        if magnitude <= 55.0:
            return cls.FRONT
        if magnitude <= 125.0:
            return cls.SIDE
        return cls.BACK

    def contains(self, theta: float) -> bool:
        return AngleClass.of(theta) is self


class MapCondition(BaseModel):
    """Independent-variable cell of the study design."""

    model_config = ConfigDict(frozen=True)

    angle: AngleClass
    num_objs: int = Field(ge=1)
    num_distractors: int = Field(ge=0)

    @model_validator(mode="after")
    def _distractors_below_objects(self) -> "MapCondition":
        if self.num_distractors >= self.num_objs:
            raise ValueError(
                f"num_distractors ({self.num_distractors}) must be below "
                f"num_objs ({self.num_objs})"
            )
        return self

    @property
    def label(self) -> str:
        return f"{self.angle.value}-{self.num_objs}-{self.num_distractors}"


class SceneObject(BaseModel):
    """A parked car. Every car both distracts and occludes."""

    model_config = ConfigDict(frozen=True)

    id: int = Field(ge=0)
    x: float
    y: float
    color: Color
    is_target: bool = False
    footprint_radius: float = Field(default=0.9, gt=0)

    @property
    def position(self) -> Point:
        return (self.x, self.y)

    def distance_to(self, point: Point) -> float:
        return math.hypot(point[0] - self.x, point[1] - self.y)


class SlotLayout(BaseModel):
    """Parking-lot geometry: extents and the slot centres cars may occupy."""

    model_config = ConfigDict(frozen=True)

    width: float = Field(gt=0, description="Extent along x, meters")
    depth: float = Field(gt=0, description="Extent along y, meters")
    slots: list[Point] = Field(min_length=1)
    footprint_radius: float = Field(default=0.9, gt=0)

    @field_validator("slots")
    @classmethod
    def _distinct_slots(cls, v: list[Point]) -> list[Point]:
        if len(set(v)) != len(v):
            raise ValueError("Slot centres must be distinct")
        return v

    @classmethod
    def load(cls, path: Optional[Path] = None) -> "SlotLayout":
        path = Path(path) if path is not None else DEFAULT_LAYOUT_PATH
        with open(path, "r", encoding="utf-8") as f:
            return cls.model_validate(json.load(f))


class SceneMap(BaseModel):
    """Static world of one trial.

    The validator enforces every scene invariant, so a loaded or hand-built
    map is always consistent with its declared condition.
    """

    model_config = ConfigDict(frozen=True)

    version: Literal["1"] = MAP_FORMAT_VERSION
    map_id: str
    width: float = Field(gt=0)
    depth: float = Field(gt=0)
    slots: list[Point]
    objects: list[SceneObject] = Field(min_length=1)
    start_pose: Pose
    condition: MapCondition
    seed: Optional[int] = None

    @model_validator(mode="after")
    def _check_invariants(self) -> "SceneMap":
        targets = [o for o in self.objects if o.is_target]
        if len(targets) != 1:
            raise ValueError(f"Expected exactly one target, found {len(targets)}")
        target = targets[0]

        if len({o.id for o in self.objects}) != len(self.objects):
            raise ValueError("Object ids must be unique")

        slot_set = set(self.slots)
        positions = [o.position for o in self.objects]
        if any(p not in slot_set for p in positions):
            raise ValueError("Every object must sit on a slot centre")
        if len(set(positions)) != len(positions):
            raise ValueError("Objects must occupy distinct slots")

        if len(self.objects) != self.condition.num_objs:
            raise ValueError(
                f"Object count {len(self.objects)} does not match "
                f"num_objs {self.condition.num_objs}"
            )
        same_color = sum(
            1 for o in self.objects if not o.is_target and o.color == target.color
        )
        if same_color != self.condition.num_distractors:
            raise ValueError(
                f"{same_color} non-targets share the target color, condition "
                f"requires {self.condition.num_distractors}"
            )

        if self.is_blocked(self.start_pose.position):
            raise ValueError("Start pose collides with an object or lies outside")
        bearing = world_to_ego(self.start_pose, target.position).theta
        if not self.condition.angle.contains(bearing):
            raise ValueError(
                f"Start bearing to target {bearing:.1f} deg is not in "
                f"angle class '{self.condition.angle.value}'"
            )
        return self

    @property
    def target(self) -> SceneObject:
        return next(o for o in self.objects if o.is_target)

    @property
    def distractors(self) -> list[SceneObject]:
        target = self.target
        return [o for o in self.objects if not o.is_target and o.color == target.color]

    def in_bounds(self, point: Point) -> bool:
        return 0.0 <= point[0] <= self.width and 0.0 <= point[1] <= self.depth

    def is_blocked(self, point: Point) -> bool:
        """True when ``point`` is outside the lot or inside a car footprint."""
        if not self.in_bounds(point):
            return True
        return any(o.distance_to(point) <= o.footprint_radius for o in self.objects)
