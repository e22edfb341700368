"""Interaural time difference model and azimuth likelihood.

ITD follows the spherical-head formula evaluated on the lateral angle, so
mirror directions about the interaural axis (front/back pairs) produce the
same ITD.
"""

from functools import lru_cache
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy.stats import norm

from src.core.config import AuditoryConfig
from src.models.belief import BeliefMap
from src.models.geometry import PolarGrid, wrap_angles

# Sampled ITDs are clipped to this many noise scales beyond the lateral maximum.
SANITY_SIGMAS = 6.0


class ItdObservation(BaseModel):
    """One observed ITD in seconds; positive when the source is to the right."""

    model_config = ConfigDict(frozen=True)

    itd: float


def lateral_angle(theta: np.ndarray) -> np.ndarray:
    """Mirror azimuths about the interaural axis into [-90, 90]."""
    theta = wrap_angles(theta)
    return np.where(np.abs(theta) > 90.0, np.sign(theta) * 180.0 - theta, theta)


def predicted_itd(theta: np.ndarray, cfg: AuditoryConfig) -> np.ndarray:
    """Spherical-head ITD (seconds) for ego azimuths in degrees."""
    lateral = np.deg2rad(lateral_angle(theta))
    return cfg.head_radius * (lateral + np.sin(lateral)) / cfg.speed_of_sound


def max_itd(cfg: AuditoryConfig) -> float:
    return float(predicted_itd(np.array(90.0), cfg))


@lru_cache(maxsize=32)
def itd_table(grid: PolarGrid, cfg: AuditoryConfig) -> np.ndarray:
    """Predicted ITD for every azimuth bin centre of ``grid``."""
    table = predicted_itd(grid.azimuth_centers, cfg)
    table.setflags(write=False)
    return table


def sample_itd(
    true_bearing: float,
    cfg: AuditoryConfig,
    rng: np.random.Generator,
    noise: Optional[float] = None,
) -> ItdObservation:
    """Draw a noisy ITD observation for a source at ``true_bearing``.

    Args:
        true_bearing: Ego azimuth of the source in degrees
        cfg: Auditory constants
        rng: Episode-owned generator
        noise: Observation noise scale; defaults to ``cfg.itd_noise``. Zero
            returns the exact prediction without consuming randomness.

    Returns:
        ItdObservation within the sanity bound
    """
    sigma = cfg.itd_noise if noise is None else noise
    value = float(predicted_itd(np.array(true_bearing), cfg))
    if sigma > 0:
        value += float(rng.normal(0.0, sigma))
    bound = max_itd(cfg) + SANITY_SIGMAS * cfg.itd_noise
    return ItdObservation(itd=float(np.clip(value, -bound, bound)))


def audio_log_likelihood(
    itd: np.ndarray, grid: PolarGrid, cfg: AuditoryConfig
) -> np.ndarray:
    """Batched log-likelihood over azimuth bins.

    Args:
        itd: Observed ITDs, any shape S

    Returns:
        Array of shape S + (azimuth bins,)
    """
    itd = np.asarray(itd, dtype=float)
    return norm.logpdf(itd[..., None], loc=itd_table(grid, cfg), scale=cfg.itd_noise)


def audio_likelihood(
    observation: ItdObservation, grid: PolarGrid, cfg: AuditoryConfig
) -> BeliefMap:
    """Unnormalized auditory likelihood, constant along range."""
    row = audio_log_likelihood(np.array(observation.itd), grid, cfg)
    return BeliefMap(np.broadcast_to(row, grid.shape), grid)
