"""Belief map value type and its summary statistics."""

from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.special import logsumexp

from src.core.exceptions import BeliefError
from src.models.geometry import EgoPolar, PolarGrid


@dataclass(frozen=True, eq=False)
class BeliefMap:
    """Log-valued map over a polar grid.

    Houses the posterior as well as the auditory and visual likelihoods and
    raw visual evidence. Values are stored in log space and may be
    unnormalized; ``normalized()`` returns the probability-normalized copy.
    """

    log_values: np.ndarray
    grid: PolarGrid

    def __post_init__(self) -> None:
        values = np.array(self.log_values, dtype=float)
        if values.shape != self.grid.shape:
            raise BeliefError(
                f"Map shape {values.shape} does not match grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise BeliefError("Belief map contains non-finite log values")
        values.setflags(write=False)
        object.__setattr__(self, "log_values", values)

    @classmethod
    def uniform(cls, grid: PolarGrid) -> "BeliefMap":
        return cls(np.full(grid.shape, -np.log(grid.num_cells)), grid)

    @classmethod
    def from_probabilities(cls, probabilities: np.ndarray, grid: PolarGrid) -> "BeliefMap":
        """Wrap non-negative weights; zeros are clipped to the smallest float."""
        probabilities = np.asarray(probabilities, dtype=float)
        if np.any(probabilities < 0):
            raise BeliefError("Probabilities must be non-negative")
        tiny = np.finfo(float).tiny
        return cls(np.log(np.clip(probabilities, tiny, None)), grid)

    @property
    def log_total(self) -> float:
        return float(logsumexp(self.log_values))

    def normalized(self) -> "BeliefMap":
        return BeliefMap(self.log_values - self.log_total, self.grid)

    def probabilities(self) -> np.ndarray:
        """Normalized probabilities, shape (range bins, azimuth bins)."""
        return np.exp(self.log_values - self.log_total)

    def require_same_grid(self, other: "BeliefMap") -> None:
        if self.grid != other.grid:
            raise BeliefError(
                f"Grid mismatch: {self.grid.shape} vs {other.grid.shape}"
            )

    def allclose(self, other: "BeliefMap", atol: float = 1e-12) -> bool:
        """Compare normalized probabilities cell by cell."""
        self.require_same_grid(other)
        return bool(
            np.allclose(self.probabilities(), other.probabilities(), rtol=0, atol=atol)
        )


class BeliefSummary(BaseModel):
    """Point estimate and spread of a posterior."""

    model_config = ConfigDict(frozen=True)

    map_estimate: EgoPolar
    map_cell: tuple[int, int]
    theta_uncertainty: float = Field(ge=0, description="Circular std, degrees")
    r_uncertainty: float = Field(ge=0, description="Range std, meters")
    entropy: float = Field(ge=0, description="Shannon entropy, nats")
    mean_resultant_length: float = Field(ge=0, le=1)
