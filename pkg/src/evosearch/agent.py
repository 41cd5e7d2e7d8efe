"""Tool-calling agent loop over a pluggable model provider.

Each round runs one loop with a fresh two-message context (system + task).
Tool results go back as tool-role messages, which are text-only; when a tool
returns an image path the encoded image is injected as a follow-up user
message instead, since common chat APIs reject images inside tool messages.
"""

from __future__ import annotations

import base64
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Protocol, Sequence

logger = logging.getLogger(__name__)

DEFAULT_TURN_BUDGET = 60
DEFAULT_IMAGE_BYTE_CAP = 4 * 1024 * 1024
PROVIDER_RETRIES = 2

ROLES = ("system", "user", "assistant", "tool")


class AgentError(RuntimeError):
    pass


class ProviderError(AgentError):
    """Transport-level provider failure; the loop retries a bounded number."""


@dataclass(frozen=True)
class TextPart:
    text: str


@dataclass(frozen=True)
class ImagePart:
    data: bytes
    source_path: str

    @property
    def base64(self) -> str:
        return base64.b64encode(self.data).decode("ascii")


@dataclass(frozen=True)
class ToolCall:
    name: str
    arguments: dict
    call_id: str


@dataclass(frozen=True)
class Message:
    role: str
    parts: tuple = ()
    tool_call_id: Optional[str] = None
    tool_calls: tuple[ToolCall, ...] = ()

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise AgentError(f"unknown message role: {self.role!r}")
        if self.role == "tool" and any(isinstance(p, ImagePart) for p in self.parts):
            raise AgentError("tool messages must not contain image parts")

    @property
    def text(self) -> str:
        return "\n".join(p.text for p in self.parts if isinstance(p, TextPart))


def text_message(role: str, text: str, tool_call_id: Optional[str] = None) -> Message:
    return Message(role=role, parts=(TextPart(text),), tool_call_id=tool_call_id)


@dataclass(frozen=True)
class ToolSchema:
    name: str
    description: str
    parameters: dict


@dataclass(frozen=True)
class ToolOutcome:
    text: str
    image_path: Optional[str] = None
    structured: Optional[dict] = None
    is_error: bool = False


@dataclass(frozen=True)
class ProviderTurn:
    assistant_text: Optional[str] = None
    tool_calls: tuple[ToolCall, ...] = ()


class Provider(Protocol):
    def next_turn(
        self, messages: Sequence[Message], tools: Sequence[ToolSchema]
    ) -> ProviderTurn: ...


@dataclass(frozen=True)
class Tool:
    schema: ToolSchema
    handler: Callable[[dict], ToolOutcome]


class ToolRegistry:
    """Name-unique registry of the tools exposed to one round's agent."""

    def __init__(self) -> None:
        self._tools: dict[str, Tool] = {}

    def register(self, schema: ToolSchema, handler: Callable[[dict], ToolOutcome]) -> None:
        if schema.name in self._tools:
            raise AgentError(f"duplicate tool name: {schema.name!r}")
        self._tools[schema.name] = Tool(schema, handler)

    def __contains__(self, name: str) -> bool:
        return name in self._tools

    def __len__(self) -> int:
        return len(self._tools)

    def get(self, name: str) -> Tool:
        return self._tools[name]

    def names(self) -> list[str]:
        return sorted(self._tools)

    def schemas(self) -> list[ToolSchema]:
        return [self._tools[n].schema for n in sorted(self._tools)]


def execute_tool(call: ToolCall, registry: ToolRegistry) -> ToolOutcome:
    """Run one tool call, converting every failure into an error outcome."""
    if call.name not in registry:
        return ToolOutcome(
            text=(
                f"unknown tool {call.name!r}; available tools: "
                + ", ".join(registry.names())
            ),
            is_error=True,
        )
    tool = registry.get(call.name)
    problem = _validate_arguments(call.arguments, tool.schema)
    if problem:
        return ToolOutcome(
            text=f"invalid arguments for {call.name}: {problem}", is_error=True
        )
    try:
        return tool.handler(call.arguments)
    except Exception as exc:  # error text goes back so the agent can self-correct
        logger.debug("tool %s raised", call.name, exc_info=True)
        return ToolOutcome(text=f"{type(exc).__name__}: {exc}", is_error=True)


def _validate_arguments(arguments: dict, schema: ToolSchema) -> Optional[str]:
    if not isinstance(arguments, dict):
        return f"expected an object, got {type(arguments).__name__}"
    params = schema.parameters
    properties = params.get("properties", {})
    required = params.get("required", [])
    missing = [key for key in required if key not in arguments]
    if missing:
        return (
            f"missing required parameter(s) {missing}; expected parameters: "
            f"{sorted(properties)}"
        )
    unknown = [key for key in arguments if key not in properties]
    if properties and unknown:
        return (
            f"unknown parameter(s) {unknown}; expected parameters: "
            f"{sorted(properties)}"
        )
    return None


@dataclass(frozen=True)
class AgentRunResult:
    messages: tuple[Message, ...]
    status: str  # completed | budget_exhausted | provider_error
    final_text: str = ""
    turns_used: int = 0
    failure_reason: Optional[str] = None


def run_agent_loop(
    system_prompt: str,
    task_prompt: str,
    tools: ToolRegistry,
    provider: Provider,
    turn_budget: int = DEFAULT_TURN_BUDGET,
    image_byte_cap: int = DEFAULT_IMAGE_BYTE_CAP,
) -> AgentRunResult:
    """Drive ingest -> model -> tool execution -> image follow-up to completion.

    The context starts with exactly [system, task]; no history is inherited
    from earlier rounds. The loop ends on the first turn without tool calls,
    or when the turn budget runs out (reported as a failure for the round).
    """
    if turn_budget < 1:
        raise AgentError("turn_budget must be >= 1")
    if len(tools) == 0:
        raise AgentError("tool registry must not be empty")
    messages: list[Message] = [
        text_message("system", system_prompt),
        text_message("user", task_prompt),
    ]
    turns_used = 0
    for _ in range(turn_budget):
        try:
            turn = _provider_turn_with_retry(provider, messages, tools)
        except ProviderError as exc:
            return AgentRunResult(
                messages=tuple(messages),
                status="provider_error",
                turns_used=turns_used,
                failure_reason=str(exc),
            )
        turns_used += 1
        assistant_parts = (
            (TextPart(turn.assistant_text),) if turn.assistant_text else ()
        )
        messages.append(
            Message(role="assistant", parts=assistant_parts, tool_calls=turn.tool_calls)
        )
        if not turn.tool_calls:
            return AgentRunResult(
                messages=tuple(messages),
                status="completed",
                final_text=turn.assistant_text or "",
                turns_used=turns_used,
            )
        image_outcomes: list[ToolOutcome] = []
        for call in turn.tool_calls:
            outcome = execute_tool(call, tools)
            messages.append(
                text_message("tool", outcome.text, tool_call_id=call.call_id)
            )
            if outcome.image_path is not None:
                image_outcomes.append(outcome)
        for outcome in image_outcomes:
            messages.append(_image_followup(outcome, image_byte_cap))
    return AgentRunResult(
        messages=tuple(messages),
        status="budget_exhausted",
        turns_used=turns_used,
        failure_reason=f"turn budget of {turn_budget} exhausted",
    )


def _provider_turn_with_retry(
    provider: Provider, messages: list[Message], tools: ToolRegistry
) -> ProviderTurn:
    last: Optional[ProviderError] = None
    for attempt in range(PROVIDER_RETRIES + 1):
        try:
            return provider.next_turn(tuple(messages), tools.schemas())
        except ProviderError as exc:
            last = exc
            logger.warning("provider error (attempt %d): %s", attempt + 1, exc)
    raise ProviderError(f"provider failed after {PROVIDER_RETRIES + 1} attempts: {last}")


def _image_followup(outcome: ToolOutcome, byte_cap: int) -> Message:
    path = Path(outcome.image_path)
    try:
        data = encode_png_capped(path, byte_cap)
        parts: tuple = (
            TextPart(f"rendered image from {path.name}:"),
            ImagePart(data=data, source_path=str(path)),
        )
    except Exception as exc:
        parts = (TextPart(f"image at {path} could not be attached: {exc}"),)
    return Message(role="user", parts=parts)


def encode_png_capped(path: Path, byte_cap: int = DEFAULT_IMAGE_BYTE_CAP) -> bytes:
    """Read a PNG, downscaling by integer factors until it fits the cap."""
    data = path.read_bytes()
    if len(data) <= byte_cap:
        return data
    from PIL import Image

    with Image.open(io.BytesIO(data)) as img:
        for factor in range(2, 65):
            width = max(1, img.width // factor)
            height = max(1, img.height // factor)
            buf = io.BytesIO()
            img.resize((width, height)).save(buf, format="PNG")
            shrunk = buf.getvalue()
            if len(shrunk) <= byte_cap:
                logger.info(
                    "downscaled %s by %dx to fit %d-byte cap", path, factor, byte_cap
                )
                return shrunk
    raise AgentError(f"image {path} cannot be reduced under {byte_cap} bytes")
