"""Tests for structured logging and episode correlation."""

import io
import json
import logging

import pytest

from src.observability.logging_config import get_logger, setup_logging
from src.utils.correlation import EpisodeContext, get_episode_id, make_episode_id


@pytest.fixture
def restore_root():
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


def test_make_episode_id():
    assert make_episode_id("front-5-0-03", 7) == "front-5-0-03#7"


def test_episode_context_nests():
    assert get_episode_id() is None
    with EpisodeContext("a#0"):
        with EpisodeContext("b#1") as inner:
            assert inner == get_episode_id() == "b#1"
        assert get_episode_id() == "a#0"
    assert get_episode_id() is None


def test_json_lines_carry_episode(restore_root):
    stream = io.StringIO()
    setup_logging(level="INFO", log_format="json", stream=stream)
    logger = get_logger("avsearch.test")

    logger.info("outside")
    with EpisodeContext("side-7-2-00#3"):
        logger.info("episode_finished", extra={"steps": 4})
    logger.debug("hidden")

    lines = [json.loads(line) for line in stream.getvalue().splitlines()]
    assert [line["message"] for line in lines] == ["outside", "episode_finished"]
    assert "episode_id" not in lines[0]
    assert lines[1]["episode_id"] == "side-7-2-00#3"
    assert lines[1]["steps"] == 4
    assert lines[1]["level"] == "INFO"
    assert lines[1]["service"] == "avsearch"
    assert lines[1]["logger"] == "avsearch.test"


def test_text_format(restore_root):
    stream = io.StringIO()
    setup_logging(level="WARNING", log_format="text", stream=stream)
    get_logger("avsearch.test").warning("careful")
    assert stream.getvalue().rstrip().endswith("avsearch.test - WARNING - careful")
