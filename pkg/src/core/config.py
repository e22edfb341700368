"""Application configuration.

Runtime settings (verbosity, observability endpoints, output path) come from
the environment through pydantic-settings. Model constants live in
``SimulationConfig`` and are loaded from a TOML file; defaults are the
published parameter table.
"""

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, HttpUrl, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from src.core.exceptions import ConfigurationError
from src.models.geometry import PolarGrid

DEFAULT_CONFIG_PATH = Path(__file__).resolve().parents[2] / "config" / "default.toml"


class Settings(BaseSettings):
    """Runtime settings loaded from environment variables."""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_prefix="AVSEARCH_",
        case_sensitive=False,
        extra="ignore",
    )

    # Logging Configuration
    log_level: str = Field(
        default="INFO",
        description="Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)",
    )
    log_format: str = Field(
        default="json",
        description="Log output format: 'json' or 'text'",
    )

    # Observability Stack
    loki_url: Optional[HttpUrl] = Field(
        default=None,
        description="Loki URL for centralized logging",
    )
    prometheus_pushgateway_url: Optional[str] = Field(
        default=None,
        description="Prometheus Pushgateway address for experiment metrics",
    )

    # Data Paths
    output_path: Path = Field(
        default=Path("./output"),
        description="Default output directory for experiments and renders",
    )


class _Section(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class AuditoryConfig(_Section):
    """Woodworth head model and ITD noise."""

    head_radius: float = Field(default=0.0875, gt=0, description="r_head in meters")
    speed_of_sound: float = Field(default=343.0, gt=0, description="c in m/s")
    itd_noise: float = Field(default=30e-6, gt=0, description="sigma_ITD in seconds")


class VisualConfig(_Section):
    """Visual evidence and accumulation constants."""

    fov: float = Field(default=110.0, gt=0, le=360, description="Field of view, degrees")
    merge_bearing: float = Field(
        default=5.0, ge=0, description="Bearings closer than this occlude each other"
    )
    blend: float = Field(default=0.7, gt=0, le=1, description="lambda_visual")
    exclusion_decay: float = Field(default=0.5, ge=0, lt=1, description="delta")
    visible_weight: float = Field(default=5.0, gt=0)
    match_similarity: float = Field(default=1.0, gt=0, le=1)
    mismatch_similarity: float = Field(default=0.1, gt=0, le=1)
    evidence_floor: float = Field(default=1e-6, gt=0, description="epsilon_vis per cell")


class BeliefConfig(_Section):
    """Fusion and leaky-update weights."""

    leak: float = Field(default=0.8, ge=0, le=1, description="alpha, new-evidence weight")
    visual_weight: float = Field(default=0.7, ge=0, le=1, description="w_va, visual share")


class RewardConfig(_Section):
    """Reward constants and episode horizon."""

    task_reward: float = Field(default=10.0, gt=0)
    wrong_commit_penalty: float = Field(default=10.0, ge=0)
    timestep_penalty: float = Field(default=0.1, ge=0)
    forward_penalty: float = Field(default=0.3, ge=0)
    turn_penalty: float = Field(default=0.1, ge=0)
    collision_penalty: float = Field(default=5.0, ge=0)
    gamma: float = Field(default=0.99, gt=0, le=1)
    max_steps: int = Field(default=30, ge=1)

    def scaled(self, factor: float) -> "RewardConfig":
        """Return a copy with every reward and cost multiplied by ``factor``."""
        if factor <= 0:
            raise ConfigurationError("Reward scale factor must be positive")
        return self.model_copy(
            update={
                "task_reward": self.task_reward * factor,
                "wrong_commit_penalty": self.wrong_commit_penalty * factor,
                "timestep_penalty": self.timestep_penalty * factor,
                "forward_penalty": self.forward_penalty * factor,
                "turn_penalty": self.turn_penalty * factor,
                "collision_penalty": self.collision_penalty * factor,
            }
        )


class ActionConfig(_Section):
    """Embodied action geometry."""

    turn_angle: float = Field(default=30.0, gt=0, description="Degrees per turn")
    stride: float = Field(default=1.0, gt=0, description="Meters per forward step")
    history_length: int = Field(default=4, ge=1)


class CommitConfig(_Section):
    """Commit judgement tolerance."""

    tolerance: float = Field(default=1.5, gt=0, description="Meters from target centre")


class PlannerConfig(_Section):
    """Belief-space planner parameters."""

    horizon: int = Field(default=2, ge=1, le=2)
    samples: int = Field(default=32, ge=1, description="Hypotheses per decision")


class HarnessConfig(_Section):
    """Batch experiment defaults."""

    maps_per_condition: int = Field(default=10, ge=1)
    repeats: int = Field(default=12, ge=1)
    seconds_per_step: float = Field(default=1.0, gt=0)
    workers: int = Field(default=1, ge=1)


class SimulationConfig(_Section):
    """Every model constant, grouped by concern."""

    grid: PolarGrid = Field(default_factory=PolarGrid)
    auditory: AuditoryConfig = Field(default_factory=AuditoryConfig)
    visual: VisualConfig = Field(default_factory=VisualConfig)
    belief: BeliefConfig = Field(default_factory=BeliefConfig)
    reward: RewardConfig = Field(default_factory=RewardConfig)
    actions: ActionConfig = Field(default_factory=ActionConfig)
    commit: CommitConfig = Field(default_factory=CommitConfig)
    planner: PlannerConfig = Field(default_factory=PlannerConfig)
    harness: HarnessConfig = Field(default_factory=HarnessConfig)
    noiseless: bool = Field(
        default=False, description="Draw ITD observations without noise"
    )

    @classmethod
    def load(cls, path: Optional[Path] = None) -> "SimulationConfig":
        """Load configuration from a TOML file.

        Args:
            path: TOML file; ``None`` returns the defaults

        Returns:
            Validated configuration

        Raises:
            ConfigurationError: If the file is missing, unparsable or invalid
        """
        if path is None:
            return cls()
        path = Path(path)
        if not path.exists():
            raise ConfigurationError(f"Config file not found: {path}")
        try:
            with open(path, "rb") as f:
                data = tomllib.load(f)
            return cls.model_validate(data)
        except tomllib.TOMLDecodeError as e:
            raise ConfigurationError(f"Invalid TOML in {path}: {e}") from e
        except ValidationError as e:
            raise ConfigurationError(f"Invalid configuration in {path}: {e}") from e


# Global settings instance
settings = Settings()
