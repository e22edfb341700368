"""Episode identifiers for log correlation.

Worker code wraps each episode in ``EpisodeContext`` so every log line it
emits can be traced back to ``<map_id>#<repeat>``.
"""

import contextvars
from typing import Optional

_episode_id: contextvars.ContextVar[Optional[str]] = contextvars.ContextVar(
    "episode_id", default=None
)


def make_episode_id(map_id: str, repeat: int) -> str:
    return f"{map_id}#{repeat}"


def get_episode_id() -> Optional[str]:
    """Get the episode id of the current context, if any."""
    return _episode_id.get()


class EpisodeContext:
    """Context manager tagging the current context with an episode id.

    Usage:
        with EpisodeContext(make_episode_id(scene.map_id, repeat)):
            run_episode(...)
    """

    def __init__(self, episode_id: str):
        self.episode_id = episode_id
        self.token: Optional[contextvars.Token] = None

    def __enter__(self) -> str:
        self.token = _episode_id.set(self.episode_id)
        return self.episode_id

    def __exit__(self, exc_type, exc_val, exc_tb) -> None:
        if self.token is not None:
            _episode_id.reset(self.token)
            self.token = None
