"""Belief heatmaps, matrix dumps and trajectory renders."""

import io
import math
from pathlib import Path
from typing import Optional

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure
from matplotlib.patches import Circle, Rectangle

from src.models.belief import BeliefMap
from src.models.episode import EpisodeLog
from src.models.geometry import Point
from src.models.scene import SceneMap

MATRIX_HEADER = "# avsearch belief matrix v1"

# PNG metadata without the library version keeps bytes stable across installs.
_PNG_METADATA = {"Software": None}

_CAR_FACE = {"blue": "#1f4fbf", "black": "#111111", "white": "#f4f4f4"}


def dump_matrix(belief: BeliefMap) -> str:
    """Bit-exact text dump of normalized probabilities.

    One line per range ring (nearest first), azimuth ascending from -180,
    values printed with 17 significant digits.
    """
    grid = belief.grid
    p = belief.probabilities()
    lines = [
        MATRIX_HEADER,
        f"# shape {grid.num_range_bins} {grid.num_azimuth_bins}",
        f"# range_resolution {grid.range_resolution!r} azimuth_resolution "
        f"{grid.azimuth_resolution!r}",
        "# rows: range bins ascending; columns: azimuth bins ascending from -180",
    ]
    lines.extend(" ".join(f"{v:.17g}" for v in row) for row in p)
    return "\n".join(lines) + "\n"


def load_matrix(text: str) -> np.ndarray:
    rows = [line for line in text.splitlines() if line and not line.startswith("#")]
    return np.array([[float(v) for v in row.split()] for row in rows])


def _png_bytes(fig: Figure) -> bytes:
    FigureCanvasAgg(fig)
    buffer = io.BytesIO()
    fig.savefig(buffer, format="png", metadata=_PNG_METADATA)
    return buffer.getvalue()


def heatmap_png(belief: BeliefMap, title: Optional[str] = None) -> bytes:
    """Grayscale range x azimuth image of a belief (brighter is likelier)."""
    grid = belief.grid
    fig = Figure(figsize=(8, 3), dpi=100)
    ax = fig.add_subplot(1, 1, 1)
    ax.imshow(
        belief.probabilities(),
        cmap="gray",
        origin="lower",
        aspect="auto",
        interpolation="nearest",
        extent=(
            -180.0,
            180.0,
            0.5 * grid.range_resolution,
            (grid.num_range_bins + 0.5) * grid.range_resolution,
        ),
    )
    ax.set_xlabel("azimuth (deg, right positive)")
    ax.set_ylabel("range (m)")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _png_bytes(fig)


def export_heatmap(
    belief: BeliefMap, png_path: Path, title: Optional[str] = None
) -> Path:
    """Write ``<name>.png`` and the matching ``<name>.txt`` matrix dump.

    Returns:
        Path of the PNG file
    """
    png_path = Path(png_path)
    png_path.parent.mkdir(parents=True, exist_ok=True)
    png_path.write_bytes(heatmap_png(belief, title))
    png_path.with_suffix(".txt").write_text(dump_matrix(belief), encoding="utf-8")
    return png_path


def trajectory_points(log: EpisodeLog) -> list[Point]:
    """Distinct successive positions visited, starting at the start pose."""
    points = [log.start_pose.position]
    for step in log.steps:
        if step.pose.position != points[-1]:
            points.append(step.pose.position)
    return points


def text_map_view(log: EpisodeLog, scene: SceneMap) -> str:
    """Character grid of the lot, one character per square meter, north up.

    ``o`` car, ``T`` target, ``+`` path, ``S`` start, ``E`` end and ``*``
    the committed estimate.
    """
    width = int(math.ceil(scene.width))
    depth = int(math.ceil(scene.depth))
    canvas = [["." for _ in range(width)] for _ in range(depth)]

    def put(point: Point, char: str) -> None:
        col = min(max(int(math.floor(point[0])), 0), width - 1)
        row = min(max(int(math.floor(point[1])), 0), depth - 1)
        canvas[row][col] = char

    for obj in scene.objects:
        put(obj.position, "T" if obj.is_target else "o")
    points = trajectory_points(log)
    for point in points[1:-1]:
        put(point, "+")
    if len(points) > 1:
        put(points[-1], "E")
    put(points[0], "S")
    if log.verdict is not None:
        put(log.verdict.estimate_world, "*")

    return "\n".join("".join(row) for row in reversed(canvas)) + "\n"


def trajectory_png(log: EpisodeLog, scene: SceneMap) -> bytes:
    """Top-down render of the lot with the episode's path."""
    fig = Figure(figsize=(scene.width / 3.0, scene.depth / 3.0 + 0.6), dpi=100)
    ax = fig.add_subplot(1, 1, 1)
    ax.add_patch(
        Rectangle((0, 0), scene.width, scene.depth, fill=False, edgecolor="#888888")
    )
    for obj in scene.objects:
        ax.add_patch(
            Circle(
                obj.position,
                obj.footprint_radius,
                facecolor=_CAR_FACE[obj.color.value],
                edgecolor="#d62728" if obj.is_target else "#444444",
                linewidth=2.5 if obj.is_target else 1.0,
            )
        )

    points = np.array(trajectory_points(log))
    if len(points) > 1:
        ax.plot(points[:, 0], points[:, 1], color="#ff7f0e", linewidth=1.5)
        ax.plot(*points[-1], marker="s", color="#ff7f0e", markersize=7)
    ax.plot(*points[0], marker="^", color="#2ca02c", markersize=9)
    if log.verdict is not None:
        ax.plot(*log.verdict.estimate_world, marker="*", color="#d62728", markersize=12)

    ax.set_xlim(-0.5, scene.width + 0.5)
    ax.set_ylim(-0.5, scene.depth + 0.5)
    ax.set_aspect("equal")
    outcome = log.outcome.value if log.outcome else "running"
    ax.set_title(f"{log.map_id} #{log.repeat}: {outcome}, {log.num_steps} steps")
    fig.tight_layout()
    return _png_bytes(fig)


def render_trajectory(
    log: EpisodeLog, scene: SceneMap, png_path: Path
) -> tuple[Path, str]:
    """Write the trajectory PNG and return it with the text view.

    Returns:
        (PNG path, text map view)
    """
    png_path = Path(png_path)
    png_path.parent.mkdir(parents=True, exist_ok=True)
    png_path.write_bytes(trajectory_png(log, scene))
    view = text_map_view(log, scene)
    png_path.with_suffix(".txt").write_text(view, encoding="utf-8")
    return png_path, view
