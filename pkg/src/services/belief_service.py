"""Posterior maintenance: fusion, leaky update, transport and summaries."""

import math
from functools import lru_cache

import numpy as np
from scipy import sparse
from scipy.special import entr

from src.core.config import BeliefConfig
from src.models.belief import BeliefMap, BeliefSummary
from src.models.episode import Action
from src.models.geometry import PolarGrid
from src.services.visual_model import rotate_shift

# Relative floor for cells no source maps into after a forward step.
UNREACHED_FLOOR = 1e-12


def init_uniform(grid: PolarGrid) -> BeliefMap:
    """Uniform prior over every cell."""
    return BeliefMap.uniform(grid)


def fuse(audio: BeliefMap, visual: BeliefMap, cfg: BeliefConfig) -> BeliefMap:
    """Weighted log-linear fusion of the two likelihoods.

    Returns:
        Unnormalized joint log-likelihood
    """
    audio.require_same_grid(visual)
    w = cfg.visual_weight
    return BeliefMap(w * visual.log_values + (1.0 - w) * audio.log_values, audio.grid)


def leaky_update(prior: BeliefMap, joint: BeliefMap, cfg: BeliefConfig) -> BeliefMap:
    """Blend the old log-belief with new evidence, then normalize."""
    prior.require_same_grid(joint)
    a = cfg.leak
    blended = (1.0 - a) * prior.log_values + a * joint.log_values
    return BeliefMap(blended, prior.grid).normalized()


@lru_cache(maxsize=8)
def forward_operator(
    grid: PolarGrid, stride: float
) -> tuple[sparse.csr_matrix, np.ndarray]:
    """Sparse push operator re-projecting mass after a forward step.

    Every source cell centre is moved into the frame of the advanced pose
    and its mass is split bilinearly over the four surrounding cell centres
    (azimuth wraps, range clamps to the grid). Images within half a range
    step of the new origin are dropped.

    Returns:
        (operator of shape (cells, cells) acting on row-major flattened maps,
        boolean mask of target cells that receive no mass)
    """
    x, y = grid.cell_xy
    x_new = x.ravel()
    y_new = y.ravel() - stride
    r_new = np.hypot(x_new, y_new)
    theta_new = np.degrees(np.arctan2(x_new, y_new))

    kept = r_new >= grid.range_resolution / 2.0
    sources = np.flatnonzero(kept)
    fr = np.clip(grid.fractional_range_index(r_new[kept]), 0.0, grid.num_range_bins - 1)
    fa = grid.fractional_azimuth_index(theta_new[kept])

    i0 = np.floor(fr).astype(int)
    wr = fr - i0
    i1 = np.minimum(i0 + 1, grid.num_range_bins - 1)
    a0 = np.floor(fa).astype(int)
    wa = fa - a0
    na = grid.num_azimuth_bins
    a1 = (a0 + 1) % na
    a0 = a0 % na

    rows = np.concatenate([i0 * na + a0, i0 * na + a1, i1 * na + a0, i1 * na + a1])
    cols = np.tile(sources, 4)
    vals = np.concatenate(
        [(1 - wr) * (1 - wa), (1 - wr) * wa, wr * (1 - wa), wr * wa]
    )
    operator = sparse.coo_matrix(
        (vals, (rows, cols)), shape=(grid.num_cells, grid.num_cells)
    ).tocsr()
    unreached = np.asarray(operator.sum(axis=1)).ravel() <= 0.0
    unreached.setflags(write=False)
    return operator, unreached


def transport_forward(belief: BeliefMap, stride: float) -> BeliefMap:
    """Re-project a normalized map into the frame ``stride`` meters ahead."""
    operator, unreached = forward_operator(belief.grid, stride)
    moved = operator @ belief.probabilities().ravel()
    moved[unreached] += UNREACHED_FLOOR / belief.grid.num_cells
    moved = moved.reshape(belief.grid.shape)
    return BeliefMap.from_probabilities(moved, belief.grid).normalized()


def transport(belief: BeliefMap, action: Action, step: float, turn: float) -> BeliefMap:
    """Move the belief with the agent.

    Args:
        belief: Normalized map in the pre-action frame
        action: Action taken
        step: Stride in meters for forward steps
        turn: Turn magnitude in degrees

    Returns:
        Normalized map in the post-action frame
    """
    if action is Action.TURN_LEFT:
        return rotate_shift(belief, -turn)
    if action is Action.TURN_RIGHT:
        return rotate_shift(belief, turn)
    if action is Action.MOVE_FORWARD:
        return transport_forward(belief, step)
    return belief


def summarize(belief: BeliefMap) -> BeliefSummary:
    """MAP estimate, circular and linear spread, and entropy of a belief.

    Ties for the maximum resolve to the lowest range bin, then the lowest
    azimuth bin. The azimuth spread is the circular standard deviation
    sqrt(-2 ln R) of the azimuth marginal.
    """
    grid = belief.grid
    p = belief.probabilities()

    flat_index = int(np.argmax(p))
    i, j = divmod(flat_index, grid.num_azimuth_bins)

    theta_marginal = p.sum(axis=0)
    rad = np.deg2rad(grid.azimuth_centers)
    resultant = math.hypot(
        float(theta_marginal @ np.cos(rad)), float(theta_marginal @ np.sin(rad))
    )
    resultant = min(max(resultant, 1e-12), 1.0)
    theta_std = math.degrees(math.sqrt(-2.0 * math.log(resultant)))

    range_marginal = p.sum(axis=1)
    ranges = grid.range_centers
    mean_r = float(range_marginal @ ranges)
    r_std = math.sqrt(max(float(range_marginal @ (ranges - mean_r) ** 2), 0.0))

    entropy = float(entr(p).sum())
    entropy = min(max(entropy, 0.0), math.log(grid.num_cells))

    return BeliefSummary(
        map_estimate=grid.cell_center(i, j),
        map_cell=(i, j),
        theta_uncertainty=theta_std,
        r_uncertainty=r_std,
        entropy=entropy,
        mean_resultant_length=resultant,
    )


def mass_within(belief: BeliefMap, cell: tuple[int, int], radius: float) -> float:
    """Posterior mass of cells whose centres lie within ``radius`` of ``cell``."""
    x, y = belief.grid.cell_xy
    i, j = cell
    near = np.hypot(x - x[i, j], y - y[i, j]) <= radius
    return float(belief.probabilities()[near].sum())
