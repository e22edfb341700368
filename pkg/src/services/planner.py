"""Greedy belief-space planner.

Scores every action by its immediate cost plus the discounted value of
committing afterwards. The post-action belief is predicted by sampling
target hypotheses from the current posterior and replaying, for each one,
the perception step the environment performs: the visual memory is moved
with the agent and blended with simulated evidence at the visual blend
rate, fused with a simulated ITD and folded into the transported posterior
with the leaky update. With a horizon of two, each hypothesis may take one
more action before committing.

Simulated evidence is built from the agent's own visual memory. Columns
that stay in view show what they showed before. Columns that turn into
view are seen empty, unless the hypothesis lies in them, in which case it
shows up as a lone target-colored car.
"""

import math
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree
from scipy.special import logsumexp

from src.core.config import SimulationConfig
from src.models.episode import Action, CognitiveState
from src.models.geometry import PolarGrid
from src.services.auditory_model import (
    SANITY_SIGMAS,
    audio_log_likelihood,
    max_itd,
    predicted_itd,
)
from src.services.belief_service import (
    UNREACHED_FLOOR,
    forward_operator,
    init_uniform,
    transport,
)
from src.services.visual_model import fov_azimuth_mask

# Earlier entries win ties.
TIE_BREAK_ORDER = (
    Action.COMMIT,
    Action.STAY,
    Action.TURN_LEFT,
    Action.TURN_RIGHT,
    Action.MOVE_FORWARD,
)
EXPLORE_ACTIONS = TIE_BREAK_ORDER[1:]

# Action values closer than this count as equal.
VALUE_TOLERANCE = 1e-9

TINY = np.finfo(float).tiny


@lru_cache(maxsize=8)
def commit_neighbourhood(grid: PolarGrid, tolerance: float) -> sparse.csr_matrix:
    """Cells whose centres lie within ``tolerance`` meters of each cell centre.

    Returns:
        (cells, cells) 0/1 matrix over row-major flattened maps; row c marks
        the cells a commit on c counts as hits
    """
    x, y = (a.ravel() for a in grid.cell_xy)
    tree = cKDTree(np.column_stack([x, y]))
    pairs = tree.query_pairs(tolerance + 1e-9, output_type="ndarray")
    i, j = pairs[:, 0], pairs[:, 1]
    keep = np.hypot(x[i] - x[j], y[i] - y[j]) <= tolerance
    i, j = i[keep], j[keep]
    diagonal = np.arange(grid.num_cells)
    rows = np.concatenate([i, j, diagonal])
    cols = np.concatenate([j, i, diagonal])
    return sparse.csr_matrix(
        (np.ones(rows.size), (rows, cols)), shape=(grid.num_cells, grid.num_cells)
    )


class GreedyPlanner:
    """Expected-utility action selection over the posterior."""

    name = "greedy"

    def __init__(self, config: Optional[SimulationConfig] = None):
        """Initialize planner.

        Args:
            config: Simulation constants; reward terms are rescaled by the
                task reward so only their ratios matter
        """
        self.config = config or SimulationConfig()
        cfg = self.config
        scale = cfg.reward.task_reward
        self._timestep = cfg.reward.timestep_penalty / scale
        self._wrong = cfg.reward.wrong_commit_penalty / scale
        self._gamma = cfg.reward.gamma
        self._costs = {
            Action.STAY: 0.0,
            Action.TURN_LEFT: cfg.reward.turn_penalty / scale,
            Action.TURN_RIGHT: cfg.reward.turn_penalty / scale,
            Action.MOVE_FORWARD: cfg.reward.forward_penalty / scale,
        }

        grid = cfg.grid
        self._turn_bins = grid.rotation_bins(cfg.actions.turn_angle)
        self._cell_x, self._cell_y = (a.ravel() for a in grid.cell_xy)
        self._fov_columns = fov_azimuth_mask(grid, cfg.visual.fov)
        self._neighbours = commit_neighbourhood(grid, cfg.commit.tolerance)

        # Columns in view after an action that were out of view before it.
        self._exposed = {
            action: self._fov_columns & ~self._shift(self._fov_columns, action)
            for action in EXPLORE_ACTIONS
        }
        visual = cfg.visual
        peak = visual.visible_weight * visual.match_similarity
        self._peak_share = peak / (peak + grid.num_cells * visual.evidence_floor)

    def decide(self, state: CognitiveState, rng: np.random.Generator) -> Action:
        values = self.action_values(state, rng)
        best = max(values.values())
        for action in TIE_BREAK_ORDER:
            if values[action] >= best - VALUE_TOLERANCE:
                return action
        raise AssertionError("unreachable")

    def action_values(
        self, state: CognitiveState, rng: np.random.Generator
    ) -> dict[Action, float]:
        """Expected normalized return of each action from ``state``."""
        current = state.posterior.normalized().log_values[None]
        values = {Action.COMMIT: float(self._commit_value(self._hit_mass(current))[0])}
        hx, hy, weights = self._hypotheses(state, rng)
        for action in EXPLORE_ACTIONS:
            after, seen, (hx1, hy1) = self._first_step(state, action, hx, hy, rng)
            continuation = self._commit_value(self._hit_mass(after))
            if self.config.planner.horizon >= 2:
                for second in EXPLORE_ACTIONS:
                    hx2, hy2 = self._move(hx1, hy1, second)
                    after2, _ = self._simulate_update(
                        self._transport_logs(after, second),
                        self._transport_probs(seen, second),
                        (hx1, hy1),
                        (hx2, hy2),
                        second,
                        rng,
                    )
                    q2 = (
                        -self._timestep
                        - self._costs[second]
                        + self._gamma * self._commit_value(self._hit_mass(after2))
                    )
                    continuation = np.maximum(continuation, q2)
            values[action] = float(
                -self._timestep
                - self._costs[action]
                + self._gamma * (weights @ continuation)
            )
        return values

    def expected_hit_mass(
        self, state: CognitiveState, action: Action, rng: np.random.Generator
    ) -> float:
        """Hit mass the planner predicts one step after ``action``.

        Raises:
            ValueError: For commit, which ends the episode
        """
        if action is Action.COMMIT:
            raise ValueError("Nothing follows a commit")
        hx, hy, weights = self._hypotheses(state, rng)
        after, _, _ = self._first_step(state, action, hx, hy, rng)
        return float(weights @ self._hit_mass(after))

    def _hypotheses(
        self, state: CognitiveState, rng: np.random.Generator
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Distinct sampled target cells (ego x, ego y) and their sample shares."""
        probs = state.posterior.probabilities().ravel()
        samples = rng.choice(
            probs.size, size=self.config.planner.samples, p=probs / probs.sum()
        )
        cells, counts = np.unique(samples, return_counts=True)
        return self._cell_x[cells], self._cell_y[cells], counts / counts.sum()

    def _first_step(
        self,
        state: CognitiveState,
        action: Action,
        hx: np.ndarray,
        hy: np.ndarray,
        rng: np.random.Generator,
    ) -> tuple[np.ndarray, np.ndarray, tuple[np.ndarray, np.ndarray]]:
        cfg = self.config
        visual = state.visual if state.visual is not None else init_uniform(cfg.grid)
        prior = transport(
            state.posterior, action, cfg.actions.stride, cfg.actions.turn_angle
        )
        moved = self._move(hx, hy, action)
        after, seen = self._simulate_update(
            prior.log_values[None],
            self._transport_probs(visual.probabilities()[None], action),
            (hx, hy),
            moved,
            action,
            rng,
        )
        return after, seen, moved

    def _commit_value(self, p_hit: np.ndarray) -> np.ndarray:
        return -self._timestep + p_hit - self._wrong * (1.0 - p_hit)

    def _hit_mass(self, log_posts: np.ndarray) -> np.ndarray:
        """Mass within the commit tolerance of each map's MAP cell.

        Args:
            log_posts: Normalized log posteriors of shape (K, R, A)
        """
        k = log_posts.shape[0]
        flat = log_posts.reshape(k, -1)
        best = np.argmax(flat, axis=1)
        near = self._neighbours[best].tocoo()
        mass = np.exp(flat[near.row, near.col])
        return np.bincount(near.row, weights=mass, minlength=k)

    def _move(
        self, hx: np.ndarray, hy: np.ndarray, action: Action
    ) -> tuple[np.ndarray, np.ndarray]:
        """Hypothesis positions in the ego frame after ``action``."""
        actions = self.config.actions
        if action is Action.MOVE_FORWARD:
            return hx, hy - actions.stride
        if action.is_turn:
            phi = math.radians(actions.turn_angle)
            if action is Action.TURN_LEFT:
                phi = -phi
            c, s = math.cos(phi), math.sin(phi)
            return hx * c - hy * s, hy * c + hx * s
        return hx, hy

    def _cells(self, hx: np.ndarray, hy: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        grid = self.config.grid
        r = np.hypot(hx, hy)
        theta = np.degrees(np.arctan2(hx, hy))
        ri = np.clip(
            np.floor(r / grid.range_resolution + 0.5).astype(int) - 1,
            0,
            grid.num_range_bins - 1,
        )
        ai = (
            np.floor((theta + 180.0) / grid.azimuth_resolution).astype(int)
            % grid.num_azimuth_bins
        )
        return ri, ai

    def _shift(self, maps: np.ndarray, action: Action) -> np.ndarray:
        """Rotate maps, or column masks, along their last axis with a turn."""
        if action is Action.TURN_RIGHT:
            return np.roll(maps, -self._turn_bins, axis=-1)
        if action is Action.TURN_LEFT:
            return np.roll(maps, self._turn_bins, axis=-1)
        return maps

    def _push_forward(self, probs: np.ndarray) -> np.ndarray:
        """Forward-step transport of normalized maps of shape (K, R, A)."""
        grid = self.config.grid
        operator, unreached = forward_operator(grid, self.config.actions.stride)
        k = probs.shape[0]
        moved = np.asarray(operator @ probs.reshape(k, -1).T).T
        moved[:, unreached] += UNREACHED_FLOOR / grid.num_cells
        moved /= moved.sum(axis=1, keepdims=True)
        return moved.reshape(probs.shape)

    def _transport_probs(self, probs: np.ndarray, action: Action) -> np.ndarray:
        if action is Action.MOVE_FORWARD:
            return self._push_forward(probs)
        return self._shift(probs, action)

    def _transport_logs(self, log_posts: np.ndarray, action: Action) -> np.ndarray:
        if action is Action.MOVE_FORWARD:
            moved = self._push_forward(np.exp(log_posts))
            return np.log(np.clip(moved, TINY, None))
        return self._shift(log_posts, action)

    def _simulate_update(
        self,
        prior: np.ndarray,
        memory: np.ndarray,
        before: tuple[np.ndarray, np.ndarray],
        after: tuple[np.ndarray, np.ndarray],
        action: Action,
        rng: np.random.Generator,
    ) -> tuple[np.ndarray, np.ndarray]:
        """Posterior and visual memory each hypothesis would produce.

        Args:
            prior: Transported log posteriors of shape (K or 1, R, A)
            memory: Transported visual memories (probabilities), same shape rule
            before: Ego coordinates (x, y) of the K hypotheses before ``action``
            after: Their ego coordinates after ``action``
            action: Action just simulated
            rng: Source of the simulated ITD noise

        Returns:
            (normalized log posteriors, visual memories), both of shape (K, R, A)
        """
        cfg = self.config
        hx, hy = after
        k = hx.shape[0]
        blend = cfg.visual.blend

        evidence = memory
        exposed = self._exposed[action]
        if exposed.any():
            discount = np.where(exposed, 1.0 - cfg.visual.exclusion_decay, 1.0)
            evidence = memory * discount
            evidence /= evidence.sum(axis=(1, 2), keepdims=True)
        seen = np.broadcast_to(
            (1.0 - blend) * memory + blend * evidence, (k,) + memory.shape[1:]
        ).copy()

        ri, ai = self._cells(hx, hy)
        _, ai_before = self._cells(*before)
        appears = np.flatnonzero(self._fov_columns[ai] & ~self._fov_columns[ai_before])
        if appears.size:
            share = blend * self._peak_share
            source = evidence[appears] if evidence.shape[0] == k else evidence[0]
            seen[appears] -= share * source
            seen[appears, ri[appears], ai[appears]] += share

        theta = np.degrees(np.arctan2(hx, hy))
        itd = predicted_itd(theta, cfg.auditory)
        if not cfg.noiseless:
            itd = itd + rng.normal(0.0, cfg.auditory.itd_noise, size=k)
        bound = max_itd(cfg.auditory) + SANITY_SIGMAS * cfg.auditory.itd_noise
        log_audio = audio_log_likelihood(
            np.clip(itd, -bound, bound), cfg.grid, cfg.auditory
        )

        a = cfg.belief.leak
        w = cfg.belief.visual_weight
        post = np.log(np.clip(seen, TINY, None))
        post *= a * w
        post += (1.0 - a) * prior
        post += (a * (1.0 - w)) * log_audio[:, None, :]
        post -= logsumexp(post, axis=(1, 2), keepdims=True)
        return post, seen
