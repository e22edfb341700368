"""Tests for the bridge protocol and its request loop."""

import asyncio
import io
import json

import pytest

from src.core.exceptions import BridgeError
from src.models.bridge import PROTOCOL_NAME, PROTOCOL_VERSION
from src.models.episode import OBSERVATION_FIELDS, Action
from src.repositories.map_repository import MapRepository
from src.services.bridge_server import BridgeServer, bridge_serve, encode
from src.services.search_environment import SearchEnvironment


@pytest.fixture
def map_path(tmp_path, ahead_scene):
    return str(MapRepository(tmp_path).save(ahead_scene))


@pytest.fixture
def server(small_config):
    return BridgeServer(SearchEnvironment(small_config))


def ask(server: BridgeServer, request: dict) -> tuple[dict, bool]:
    reply, closed = server.handle_line(json.dumps(request))
    return json.loads(encode(reply)), closed


def test_header(server):
    header = json.loads(server.header())
    assert header["protocol"] == PROTOCOL_NAME
    assert header["version"] == PROTOCOL_VERSION
    assert header["observation_fields"] == list(OBSERVATION_FIELDS)


class TestHandleLine:
    def test_reset_then_step(self, server, map_path, small_config):
        reply, closed = ask(server, {"kind": "reset", "seed": 1, "map_path": map_path})
        assert not closed
        assert reply["kind"] == "observation"
        assert list(reply["observation"]) == list(OBSERVATION_FIELDS)
        assert len(reply["observation"]["posterior"]) == small_config.grid.num_cells
        assert reply["done"] is False and reply["outcome"] is None

        reply, _ = ask(server, {"kind": "step", "action": "turn_right"})
        assert reply["reward"] == pytest.approx(-0.2)
        assert reply["observation"]["last_actions"][-1] == Action.TURN_RIGHT.code

    def test_step_before_reset(self, server):
        reply, closed = ask(server, {"kind": "step", "action": "stay"})
        assert reply["kind"] == "error"
        assert reply["error"]["type"] == "not_reset"
        assert not closed

    def test_invalid_json(self, server):
        reply, _ = server.handle_line("{oops")
        assert json.loads(encode(reply))["error"]["type"] == "invalid_json"

    @pytest.mark.parametrize(
        "request_",
        [
            {"kind": "step", "action": "jump"},
            {"kind": "reset", "seed": "x", "map_path": "m.json"},
            {"kind": "launch"},
            {"kind": "close", "extra": 1},
        ],
    )
    def test_bad_request(self, server, request_):
        reply, closed = ask(server, request_)
        assert reply["error"]["type"] == "bad_request"
        assert not closed

    def test_missing_map(self, server, tmp_path):
        missing = str(tmp_path / "none.json")
        reply, _ = ask(server, {"kind": "reset", "seed": 0, "map_path": missing})
        assert reply["error"]["type"] == "MapValidationError"

    def test_negative_seed_is_bad_request(self, server, map_path):
        request = {"kind": "reset", "seed": -1, "map_path": map_path}
        reply, closed = ask(server, request)
        assert reply["error"]["type"] == "bad_request"
        assert not closed

    def test_directory_map_path(self, server, tmp_path):
        request = {"kind": "reset", "seed": 0, "map_path": str(tmp_path)}
        reply, closed = ask(server, request)
        assert reply["error"]["type"] == "MapValidationError"
        assert not closed

    def test_unexpected_failure_keeps_serving(self, small_config, map_path):
        def broken_loader(path: str):
            raise RuntimeError("disk on fire")

        env = SearchEnvironment(small_config)
        server = BridgeServer(env, map_loader=broken_loader)
        reply, closed = ask(server, {"kind": "reset", "seed": 0, "map_path": map_path})
        assert reply["error"] == {"type": "internal_error", "message": "disk on fire"}
        assert not closed
        reply, _ = ask(server, {"kind": "step", "action": "stay"})
        assert reply["error"]["type"] == "not_reset"

    def test_step_after_done(self, server, map_path):
        ask(server, {"kind": "reset", "seed": 1, "map_path": map_path})
        reply, _ = ask(server, {"kind": "step", "action": "commit"})
        assert reply["done"] is True
        assert reply["outcome"] in {"committed_correct", "committed_wrong"}
        reply, _ = ask(server, {"kind": "step", "action": "stay"})
        assert reply["error"]["type"] == "episode_done"

    def test_close(self, server):
        reply, closed = ask(server, {"kind": "close"})
        assert reply == {"kind": "closed"}
        assert closed


def test_serve_stdio(server, map_path):
    requests = "\n".join(
        [
            json.dumps({"kind": "reset", "seed": 3, "map_path": map_path}),
            "",
            json.dumps({"kind": "step", "action": "stay"}),
            json.dumps({"kind": "close"}),
            json.dumps({"kind": "step", "action": "stay"}),
        ]
    )
    out = io.StringIO()
    server.serve_stdio(io.StringIO(requests + "\n"), out)
    lines = [json.loads(line) for line in out.getvalue().splitlines()]
    assert lines[0]["protocol"] == PROTOCOL_NAME
    kinds = [line.get("kind") for line in lines[1:]]
    assert kinds == ["observation", "observation", "closed"]


def test_serve_stdio_survives_bad_resets(server, map_path, tmp_path):
    requests = [
        {"kind": "reset", "seed": -1, "map_path": map_path},
        {"kind": "reset", "seed": 0, "map_path": str(tmp_path)},
        {"kind": "reset", "seed": 0, "map_path": map_path},
        {"kind": "close"},
    ]
    out = io.StringIO()
    server.serve_stdio(io.StringIO("\n".join(map(json.dumps, requests)) + "\n"), out)
    kinds = [json.loads(line).get("kind") for line in out.getvalue().splitlines()[1:]]
    assert kinds == ["error", "error", "observation", "closed"]


def test_unknown_transport(small_config):
    with pytest.raises(BridgeError):
        bridge_serve(SearchEnvironment(small_config), transport="pipe")


async def test_tcp_single_client(server, map_path):
    tcp = await server.start_tcp("127.0.0.1", 0)
    port = tcp.sockets[0].getsockname()[1]
    try:
        reader, writer = await asyncio.open_connection("127.0.0.1", port)
        header = json.loads(await reader.readline())
        assert header["protocol"] == PROTOCOL_NAME

        # a second client is refused while the first is connected
        reader2, writer2 = await asyncio.open_connection("127.0.0.1", port)
        refused = json.loads(await reader2.readline())
        assert refused["error"]["type"] == "busy"
        assert await reader2.readline() == b""
        writer2.close()

        reset = {"kind": "reset", "seed": 2, "map_path": map_path}
        writer.write((json.dumps(reset) + "\n").encode())
        await writer.drain()
        reply = json.loads(await reader.readline())
        assert reply["kind"] == "observation"

        writer.write(b'{"kind": "close"}\n')
        await writer.drain()
        assert json.loads(await reader.readline()) == {"kind": "closed"}
        writer.close()
        await writer.wait_closed()
    finally:
        tcp.close()
        await tcp.wait_closed()
