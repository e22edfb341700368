"""Egocentric polar geometry shared by every simulation module.

Conventions: world x points east and y north; bearings and headings are
measured clockwise from +y, so an ego azimuth of 0 is straight ahead and
positive azimuths lie to the right. Angles live in [-180, 180).
"""

import math
from functools import lru_cache

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.core.exceptions import GeometryError

Point = tuple[float, float]


def wrap_angle(a: float) -> float:
    """Wrap an angle in degrees into [-180, 180).

    Raises:
        GeometryError: If ``a`` is not finite
    """
    if not math.isfinite(a):
        raise GeometryError(f"Cannot wrap non-finite angle {a!r}")
    wrapped = (a + 180.0) % 360.0 - 180.0
    # float modulo can round up to exactly +180
    if wrapped >= 180.0:
        wrapped -= 360.0
    return wrapped


def wrap_angles(a: np.ndarray) -> np.ndarray:
    """Vectorized ``wrap_angle`` for finite arrays."""
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise GeometryError("Cannot wrap non-finite angles")
    wrapped = np.mod(a + 180.0, 360.0) - 180.0
    return np.where(wrapped >= 180.0, wrapped - 360.0, wrapped)


@lru_cache(maxsize=16)
def _grid_arrays(
    num_range_bins: int,
    num_azimuth_bins: int,
    range_resolution: float,
    azimuth_resolution: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    ranges = (np.arange(num_range_bins) + 1.0) * range_resolution
    azimuths = -180.0 + (np.arange(num_azimuth_bins) + 0.5) * azimuth_resolution
    rad = np.deg2rad(azimuths)
    x = np.outer(ranges, np.sin(rad))
    y = np.outer(ranges, np.cos(rad))
    for arr in (ranges, azimuths, x, y):
        arr.setflags(write=False)
    return ranges, azimuths, x, y


class PolarGrid(BaseModel):
    """Egocentric range x azimuth grid.

    Azimuth bin j covers [-180 + j*d, -180 + (j+1)*d). Range bin i is centred
    on (i+1)*dr; nearer points fall into bin 0 and farther ones into the last.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    num_range_bins: int = Field(default=30, ge=1)
    num_azimuth_bins: int = Field(default=360, ge=1)
    range_resolution: float = Field(default=1.0, gt=0, description="Meters per bin")
    azimuth_resolution: float = Field(default=1.0, gt=0, description="Degrees per bin")

    @model_validator(mode="after")
    def _covers_circle(self) -> "PolarGrid":
        if abs(self.num_azimuth_bins * self.azimuth_resolution - 360.0) > 1e-9:
            raise GeometryError(
                "Azimuth bins must cover exactly 360 degrees "
                f"({self.num_azimuth_bins} x {self.azimuth_resolution})"
            )
        return self

    @classmethod
    def with_bins(
        cls, num_range_bins: int, num_azimuth_bins: int, range_resolution: float = 1.0
    ) -> "PolarGrid":
        """Build a grid from bin counts, deriving the azimuth resolution."""
        return cls(
            num_range_bins=num_range_bins,
            num_azimuth_bins=num_azimuth_bins,
            range_resolution=range_resolution,
            azimuth_resolution=360.0 / num_azimuth_bins,
        )

    @property
    def shape(self) -> tuple[int, int]:
        return (self.num_range_bins, self.num_azimuth_bins)

    @property
    def num_cells(self) -> int:
        return self.num_range_bins * self.num_azimuth_bins

    @property
    def max_range(self) -> float:
        return self.num_range_bins * self.range_resolution

    @property
    def range_centers(self) -> np.ndarray:
        return _grid_arrays(*self.cache_key)[0]

    @property
    def azimuth_centers(self) -> np.ndarray:
        return _grid_arrays(*self.cache_key)[1]

    @property
    def cell_xy(self) -> tuple[np.ndarray, np.ndarray]:
        """Ego Cartesian coordinates (x right, y forward) of every cell centre."""
        arrays = _grid_arrays(*self.cache_key)
        return arrays[2], arrays[3]

    @property
    def cache_key(self) -> tuple[int, int, float, float]:
        return (
            self.num_range_bins,
            self.num_azimuth_bins,
            self.range_resolution,
            self.azimuth_resolution,
        )

    def range_bin(self, r: float) -> int:
        """Index of the range bin containing ``r`` (clamped to the grid)."""
        if not math.isfinite(r) or r < 0:
            raise GeometryError(f"Invalid range {r!r}")
        index = math.floor(r / self.range_resolution + 0.5) - 1
        return min(max(index, 0), self.num_range_bins - 1)

    def azimuth_bin(self, theta: float) -> int:
        """Index of the azimuth bin containing ``theta`` (wrapped)."""
        index = math.floor((wrap_angle(theta) + 180.0) / self.azimuth_resolution)
        return min(index, self.num_azimuth_bins - 1)

    def cell_of(self, point: "EgoPolar") -> tuple[int, int]:
        return self.range_bin(point.r), self.azimuth_bin(point.theta)

    def cell_center(self, range_index: int, azimuth_index: int) -> "EgoPolar":
        return EgoPolar(
            r=float(self.range_centers[range_index]),
            theta=float(self.azimuth_centers[azimuth_index]),
        )

    def fractional_range_index(self, r: np.ndarray) -> np.ndarray:
        """Continuous range-bin coordinate (0 at the first centre)."""
        return np.asarray(r, dtype=float) / self.range_resolution - 1.0

    def fractional_azimuth_index(self, theta: np.ndarray) -> np.ndarray:
        """Continuous azimuth-bin coordinate (0 at the first centre)."""
        return (wrap_angles(theta) + 180.0) / self.azimuth_resolution - 0.5

    def rotation_bins(self, delta_deg: float) -> int:
        """Number of azimuth bins equivalent to ``delta_deg``.

        Raises:
            GeometryError: If the rotation is not a whole number of bins
        """
        steps = delta_deg / self.azimuth_resolution
        rounded = round(steps)
        if abs(steps - rounded) > 1e-9:
            raise GeometryError(
                f"Rotation {delta_deg} deg is not a multiple of "
                f"{self.azimuth_resolution} deg"
            )
        return int(rounded)


class Pose(BaseModel):
    """Agent position in meters and heading in degrees."""

    model_config = ConfigDict(frozen=True)

    x: float
    y: float
    heading: float = 0.0

    @field_validator("heading")
    @classmethod
    def _normalize_heading(cls, v: float) -> float:
        return wrap_angle(v)

    @property
    def position(self) -> Point:
        return (self.x, self.y)

    def turned(self, delta: float) -> "Pose":
        return Pose(x=self.x, y=self.y, heading=self.heading + delta)

    def advanced(self, distance: float) -> "Pose":
        rad = math.radians(self.heading)
        return Pose(
            x=self.x + distance * math.sin(rad),
            y=self.y + distance * math.cos(rad),
            heading=self.heading,
        )


def heading_change(previous: Pose, current: Pose) -> float:
    """Wrapped difference of successive headings (delta psi)."""
    return wrap_angle(current.heading - previous.heading)


class EgoPolar(BaseModel):
    """Point in egocentric polar coordinates."""

    model_config = ConfigDict(frozen=True)

    r: float = Field(gt=0)
    theta: float

    @field_validator("theta")
    @classmethod
    def _wrap_theta(cls, v: float) -> float:
        return wrap_angle(v)


def world_to_ego(pose: Pose, point: Point) -> EgoPolar:
    """Express a world point relative to the agent.

    Raises:
        GeometryError: If the point coincides with the agent position
    """
    dx = point[0] - pose.x
    dy = point[1] - pose.y
    r = math.hypot(dx, dy)
    if r == 0.0:
        raise GeometryError("degenerate range zero")
    bearing = math.degrees(math.atan2(dx, dy))
    return EgoPolar(r=r, theta=bearing - pose.heading)


def ego_to_world(pose: Pose, ep: EgoPolar) -> Point:
    """Inverse of ``world_to_ego``."""
    rad = math.radians(ep.theta + pose.heading)
    return (pose.x + ep.r * math.sin(rad), pose.y + ep.r * math.cos(rad))


def world_to_ego_many(pose: Pose, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized ranges and ego azimuths for an (N, 2) array of world points."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    dx = points[:, 0] - pose.x
    dy = points[:, 1] - pose.y
    r = np.hypot(dx, dy)
    theta = wrap_angles(np.degrees(np.arctan2(dx, dy)) - pose.heading) if len(r) else r
    return r, theta
