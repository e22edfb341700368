"""Repository for reading and writing search maps."""

import json
from pathlib import Path

from pydantic import ValidationError

from src.core.exceptions import MapValidationError
from src.models.scene import SceneMap
from src.observability.logging_config import get_logger

logger = get_logger(__name__)


class MapRepository:
    """Map files in one directory, one JSON document per map."""

    def __init__(self, maps_dir: Path) -> None:
        """Initialize map repository.

        Args:
            maps_dir: Directory holding ``<map_id>.json`` files
        """
        self.maps_dir = Path(maps_dir)

    def save(self, scene: SceneMap) -> Path:
        """Write a map as sorted, indented JSON.

        Args:
            scene: Map to store

        Returns:
            Path to the written file
        """
        self.maps_dir.mkdir(parents=True, exist_ok=True)
        file_path = self.maps_dir / f"{scene.map_id}.json"
        file_path.write_text(dump_map(scene), encoding="utf-8")
        return file_path

    def list_paths(self) -> list[Path]:
        if not self.maps_dir.is_dir():
            return []
        return sorted(self.maps_dir.glob("*.json"))

    def load_all(self) -> list[SceneMap]:
        """Load every map in the directory, ordered by file name."""
        return [load_map(path) for path in self.list_paths()]


def dump_map(scene: SceneMap) -> str:
    return json.dumps(scene.model_dump(mode="json"), sort_keys=True, indent=2) + "\n"


def load_map(path: Path) -> SceneMap:
    """Load and validate one map file.

    Raises:
        MapValidationError: If the file is missing, not JSON or violates a
            scene invariant
    """
    path = Path(path)
    if not path.exists():
        raise MapValidationError(str(path), "file not found")
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise MapValidationError(str(path), f"invalid JSON: {e}") from e
    except (OSError, UnicodeDecodeError) as e:
        raise MapValidationError(str(path), f"unreadable: {e}") from e

    try:
        scene = SceneMap.model_validate(data)
    except ValidationError as e:
        raise MapValidationError(str(path), str(e)) from e
    logger.debug("map_loaded", extra={"map_id": scene.map_id, "path": str(path)})
    return scene
