"""Request loop exposing the environment to external trainers.

The protocol is line-delimited JSON. The server writes a header line, then
answers every request line with exactly one reply line. Malformed requests
get an error reply and the loop keeps serving.
"""

import asyncio
import json
import sys
from typing import Callable, Optional, TextIO

from pydantic import BaseModel, ValidationError

from src.core.exceptions import AvSearchError, BridgeError
from src.models.bridge import (
    BridgeHeader,
    ClosedReply,
    CloseRequest,
    ErrorReply,
    ObservationReply,
    ResetRequest,
    StepRequest,
    request_adapter,
)
from src.models.scene import SceneMap
from src.observability.logging_config import get_logger
from src.repositories.map_repository import load_map
from src.services.search_environment import SearchEnvironment

logger = get_logger(__name__)


def encode(message: BaseModel) -> str:
    return json.dumps(message.model_dump(mode="json")) + "\n"


class BridgeServer:
    """Single-client, strictly serialized bridge around one environment."""

    def __init__(
        self,
        env: SearchEnvironment,
        map_loader: Callable[[str], SceneMap] = load_map,
    ):
        """Initialize bridge server.

        Args:
            env: Environment driven by the client
            map_loader: Resolves ``map_path`` of reset requests
        """
        self.env = env
        self.map_loader = map_loader
        self._started = False
        self._client_connected = False

    def header(self) -> str:
        return encode(BridgeHeader())

    def handle_line(self, line: str) -> tuple[BaseModel, bool]:
        """Answer one request line.

        Returns:
            (reply message, whether the session is closed)
        """
        try:
            payload = json.loads(line)
        except json.JSONDecodeError as e:
            return ErrorReply.of("invalid_json", str(e)), False
        try:
            request = request_adapter.validate_python(payload)
        except ValidationError as e:
            return ErrorReply.of("bad_request", str(e)), False

        logger.debug("bridge_request", extra={"kind": request.kind})
        try:
            if isinstance(request, CloseRequest):
                return ClosedReply(), True
            if isinstance(request, ResetRequest):
                return self._reset(request), False
            return self._step(request), False
        except BridgeError as e:
            return ErrorReply.of(e.error_type, str(e)), False
        except AvSearchError as e:
            return ErrorReply.of(type(e).__name__, str(e)), False
        except Exception as e:
            logger.error(
                f"Bridge request failed: {e}",
                extra={"kind": request.kind},
                exc_info=True,
            )
            return ErrorReply.of("internal_error", str(e)), False

    def _reset(self, request: ResetRequest) -> ObservationReply:
        scene = self.map_loader(request.map_path)
        state = self.env.reset(scene, request.seed, policy="bridge")
        self._started = True
        return ObservationReply(observation=state.to_observation())

    def _step(self, request: StepRequest) -> ObservationReply:
        if not self._started:
            raise BridgeError("step before reset", error_type="not_reset")
        if self.env.done:
            raise BridgeError("episode is done; send reset", error_type="episode_done")
        result = self.env.step(request.action)
        return ObservationReply(
            observation=result.state.to_observation(),
            reward=result.reward,
            done=result.done,
            outcome=result.outcome,
        )

    def serve_stdio(
        self, instream: Optional[TextIO] = None, outstream: Optional[TextIO] = None
    ) -> None:
        """Serve one client over text streams until close or end of input."""
        instream = instream or sys.stdin
        outstream = outstream or sys.stdout
        outstream.write(self.header())
        outstream.flush()
        for line in instream:
            if not line.strip():
                continue
            reply, closed = self.handle_line(line)
            outstream.write(encode(reply))
            outstream.flush()
            if closed:
                break
        logger.info("bridge_session_closed", extra={"transport": "stdio"})

    async def _handle_client(
        self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter
    ) -> None:
        if self._client_connected:
            writer.write(
                encode(ErrorReply.of("busy", "another client is connected")).encode()
            )
            await writer.drain()
            writer.close()
            await writer.wait_closed()
            logger.warning("bridge_client_refused")
            return

        self._client_connected = True
        try:
            writer.write(self.header().encode())
            await writer.drain()
            while True:
                raw = await reader.readline()
                if not raw:
                    break
                line = raw.decode("utf-8")
                if not line.strip():
                    continue
                reply, closed = self.handle_line(line)
                writer.write(encode(reply).encode())
                await writer.drain()
                if closed:
                    break
        finally:
            self._client_connected = False
            writer.close()
            await writer.wait_closed()
            logger.info("bridge_session_closed", extra={"transport": "tcp"})

    async def start_tcp(self, host: str = "127.0.0.1", port: int = 0) -> asyncio.Server:
        """Listen on a local TCP socket; one client is served at a time."""
        server = await asyncio.start_server(self._handle_client, host, port)
        sockets = server.sockets or []
        if sockets:
            logger.info(
                "bridge_listening",
                extra={"host": host, "port": sockets[0].getsockname()[1]},
            )
        return server

    async def serve_tcp(self, host: str = "127.0.0.1", port: int = 0) -> None:
        server = await self.start_tcp(host, port)
        async with server:
            await server.serve_forever()


def bridge_serve(
    env: SearchEnvironment,
    transport: str = "stdio",
    host: str = "127.0.0.1",
    port: int = 0,
) -> None:
    """Run the request loop on ``stdio`` or a local ``tcp`` socket.

    Raises:
        BridgeError: If the transport is unknown
    """
    server = BridgeServer(env)
    if transport == "stdio":
        server.serve_stdio()
    elif transport == "tcp":
        asyncio.run(server.serve_tcp(host, port))
    else:
        raise BridgeError(
            f"Unknown transport '{transport}'", error_type="bad_transport"
        )
