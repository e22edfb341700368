"""Repository for experiment outputs: metrics CSV and JSON Lines episode logs."""

import json
from pathlib import Path
from typing import Iterable

import pandas as pd

from src.core.exceptions import ExperimentError
from src.models.episode import EpisodeLog, StepRecord
from src.models.experiment import METRIC_COLUMNS
from src.utils.correlation import make_episode_id

# Keys computed from the log rather than stored in it.
_DERIVED_KEYS = frozenset(
    {
        "record",
        "episode_id",
        "num_steps",
        "return",
        "head_turn_deg",
        "displacement_m",
        "strategy",
    }
)


class ExperimentRepository:
    """Files of one experiment run.

    ``<name>.csv`` holds one metric row per episode; ``<name>_episodes.jsonl``
    holds one ``step`` record per step followed by one ``episode`` record per
    episode.
    """

    def __init__(self, metrics_path: Path) -> None:
        """Initialize repository.

        Args:
            metrics_path: Target CSV path; the log file is placed beside it
        """
        self.metrics_path = Path(metrics_path)
        self.logs_path = self.metrics_path.with_name(
            f"{self.metrics_path.stem}_episodes.jsonl"
        )

    def ensure_writable(self) -> None:
        """Create the output directory or fail early.

        Raises:
            ExperimentError: If the directory cannot be created
        """
        try:
            self.metrics_path.parent.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ExperimentError(
                f"Output directory {self.metrics_path.parent} is not writable: {e}"
            ) from e

    def save_metrics(self, metrics: pd.DataFrame) -> Path:
        self.ensure_writable()
        try:
            metrics.loc[:, list(METRIC_COLUMNS)].to_csv(
                self.metrics_path, index=False, lineterminator="\n"
            )
        except OSError as e:
            raise ExperimentError(f"Cannot write {self.metrics_path}: {e}") from e
        return self.metrics_path

    def save_logs(self, logs: Iterable[EpisodeLog]) -> Path:
        self.ensure_writable()
        try:
            with open(self.logs_path, "w", encoding="utf-8") as f:
                for log in logs:
                    for record in episode_records(log):
                        f.write(json.dumps(record, sort_keys=True) + "\n")
        except OSError as e:
            raise ExperimentError(f"Cannot write {self.logs_path}: {e}") from e
        return self.logs_path

    def load_metrics(self) -> pd.DataFrame:
        return load_metrics(self.metrics_path)

    def load_logs(self) -> list[EpisodeLog]:
        return load_episode_logs(self.logs_path)


def episode_records(log: EpisodeLog) -> list[dict]:
    """JSON Lines records of one episode: its steps, then a closing summary."""
    episode_id = make_episode_id(log.map_id, log.repeat)
    records = [
        {"record": "step", "episode_id": episode_id, **step.model_dump(mode="json")}
        for step in log.steps
    ]
    header = log.model_dump(mode="json", exclude={"steps"})
    header.update(
        {
            "record": "episode",
            "episode_id": episode_id,
            "num_steps": log.num_steps,
            "return": log.total_return,
            "head_turn_deg": log.head_turn_deg,
            "displacement_m": log.displacement_m,
            "strategy": log.strategy.value,
        }
    )
    records.append(header)
    return records


def load_episode_logs(path: Path) -> list[EpisodeLog]:
    """Rebuild episode logs from a JSON Lines file.

    Raises:
        ExperimentError: If the file is missing or malformed
    """
    path = Path(path)
    if not path.exists():
        raise ExperimentError(f"Episode log not found: {path}")

    logs: list[EpisodeLog] = []
    pending: list[StepRecord] = []
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise ExperimentError(f"{path}:{line_no}: invalid JSON: {e}") from e
            kind = record.get("record")
            if kind == "step":
                pending.append(
                    StepRecord.model_validate(
                        {k: v for k, v in record.items() if k not in _DERIVED_KEYS}
                    )
                )
            elif kind == "episode":
                fields = {k: v for k, v in record.items() if k not in _DERIVED_KEYS}
                logs.append(EpisodeLog.model_validate({**fields, "steps": pending}))
                pending = []
            else:
                raise ExperimentError(f"{path}:{line_no}: unknown record kind {kind!r}")
    return logs


def load_metrics(path: Path) -> pd.DataFrame:
    """Read a metrics CSV and check its columns.

    Raises:
        ExperimentError: If the file is missing or lacks metric columns
    """
    path = Path(path)
    if not path.exists():
        raise ExperimentError(f"Metrics file not found: {path}")
    metrics = pd.read_csv(path)
    missing = [c for c in METRIC_COLUMNS if c not in metrics.columns]
    if missing:
        raise ExperimentError(f"{path} lacks metric columns: {missing}")
    return metrics
