"""Wire messages of the bridge protocol (one JSON object per line)."""

from typing import Annotated, Any, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, TypeAdapter

from src.models.episode import OBSERVATION_FIELDS, Action, Outcome

PROTOCOL_NAME = "avsearch-bridge"
PROTOCOL_VERSION = 1


class _Message(BaseModel):
    model_config = ConfigDict(extra="forbid")


class BridgeHeader(_Message):
    """First line written by the server on every connection."""

    protocol: Literal["avsearch-bridge"] = PROTOCOL_NAME
    version: int = PROTOCOL_VERSION
    observation_fields: list[str] = Field(
        default_factory=lambda: list(OBSERVATION_FIELDS)
    )


class ResetRequest(_Message):
    kind: Literal["reset"]
    seed: int = Field(ge=0, description="Seed of the episode's observation noise")
    map_path: str


class StepRequest(_Message):
    kind: Literal["step"]
    action: Action


class CloseRequest(_Message):
    kind: Literal["close"]


BridgeRequest = Annotated[
    Union[ResetRequest, StepRequest, CloseRequest], Field(discriminator="kind")
]
request_adapter: TypeAdapter[BridgeRequest] = TypeAdapter(BridgeRequest)


class ObservationReply(_Message):
    kind: Literal["observation"] = "observation"
    observation: dict[str, Any]
    reward: float = 0.0
    done: bool = False
    outcome: Optional[Outcome] = None


class ClosedReply(_Message):
    kind: Literal["closed"] = "closed"


class ErrorDetail(_Message):
    type: str
    message: str


class ErrorReply(_Message):
    kind: Literal["error"] = "error"
    error: ErrorDetail

    @classmethod
    def of(cls, error_type: str, message: str) -> "ErrorReply":
        return cls(error=ErrorDetail(type=error_type, message=message))
