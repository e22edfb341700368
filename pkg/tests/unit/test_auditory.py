"""Tests for the ITD model and the auditory likelihood."""

import math

import numpy as np
import pytest

from src.core.config import AuditoryConfig
from src.models.geometry import PolarGrid
from src.services.auditory_model import (
    ItdObservation,
    audio_likelihood,
    audio_log_likelihood,
    itd_table,
    lateral_angle,
    max_itd,
    predicted_itd,
    sample_itd,
)


@pytest.fixture
def cfg() -> AuditoryConfig:
    return AuditoryConfig()


class TestItdModel:
    def test_zero_ahead(self, cfg):
        assert predicted_itd(np.array(0.0), cfg) == 0.0

    def test_lateral_maximum(self, cfg):
        assert max_itd(cfg) == pytest.approx(655.9e-6, abs=0.1e-6)

    def test_antisymmetric_on_every_bin(self, cfg):
        table = itd_table(PolarGrid(), cfg)
        assert np.max(np.abs(table + table[::-1])) <= 1e-12

    def test_front_back_mirror_on_every_bin(self, cfg):
        grid = PolarGrid()
        mirrored = predicted_itd(180.0 - grid.azimuth_centers, cfg)
        assert np.max(np.abs(itd_table(grid, cfg) - mirrored)) <= 1e-12

    def test_lateral_angle(self):
        assert lateral_angle(np.array([150.0, -150.0, 30.0])) == pytest.approx(
            [30.0, -30.0, 30.0]
        )

    def test_right_is_positive(self, cfg):
        assert predicted_itd(np.array(45.0), cfg) > 0
        assert predicted_itd(np.array(-45.0), cfg) < 0

    def test_table_is_read_only(self, cfg):
        table = itd_table(PolarGrid(), cfg)
        with pytest.raises(ValueError):
            table[0] = 1.0


class TestSampling:
    def test_zero_noise_consumes_no_randomness(self, cfg):
        rng = np.random.default_rng(5)
        before = rng.bit_generator.state
        obs = sample_itd(90.0, cfg, rng, noise=0.0)
        assert rng.bit_generator.state == before
        assert obs.itd == pytest.approx(max_itd(cfg))

    def test_noise_statistics(self, cfg):
        rng = np.random.default_rng(0)
        draws = np.array([sample_itd(20.0, cfg, rng).itd for _ in range(4000)])
        expected = float(predicted_itd(np.array(20.0), cfg))
        assert draws.mean() == pytest.approx(expected, abs=2e-6)
        assert draws.std() == pytest.approx(cfg.itd_noise, rel=0.05)

    def test_clipped_to_sanity_bound(self, cfg):
        rng = np.random.default_rng(0)
        obs = sample_itd(90.0, cfg, rng, noise=1.0)
        assert abs(obs.itd) <= max_itd(cfg) + 6 * cfg.itd_noise + 1e-15


class TestLikelihood:
    def test_shape_follows_batch(self, cfg):
        grid = PolarGrid.with_bins(5, 36)
        out = audio_log_likelihood(np.zeros((4, 2)), grid, cfg)
        assert out.shape == (4, 2, 36)

    def test_constant_along_range(self, cfg):
        grid = PolarGrid.with_bins(5, 36)
        lik = audio_likelihood(ItdObservation(itd=2e-4), grid, cfg)
        assert np.all(lik.log_values == lik.log_values[0])

    def test_off_peak_density_matches_scalar_evaluation(self, cfg):
        grid = PolarGrid.with_bins(3, 8)
        lat = math.radians(22.5)
        at_bin = cfg.head_radius * (lat + math.sin(lat)) / cfg.speed_of_sound
        itd = at_bin + 20e-6
        sigma = cfg.itd_noise
        density = math.exp(-((itd - at_bin) ** 2) / (2 * sigma**2)) / math.sqrt(
            2 * math.pi * sigma**2
        )
        lik = audio_likelihood(ItdObservation(itd=itd), grid, cfg)
        got = math.exp(lik.log_values[1, grid.azimuth_bin(22.5)])
        assert abs(got - density) <= 1e-12 * density

    def test_peaks_at_source_and_its_mirror(self, cfg):
        grid = PolarGrid()
        theta = 40.5
        itd = float(predicted_itd(np.array(theta), cfg))
        row = audio_likelihood(ItdObservation(itd=itd), grid, cfg).log_values[0]
        best = set(np.flatnonzero(row >= row.max() - 1e-9))
        assert best == {grid.azimuth_bin(theta), grid.azimuth_bin(180.0 - theta)}
