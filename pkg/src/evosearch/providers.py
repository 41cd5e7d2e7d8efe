"""Model providers: a deterministic scripted replay and a generic HTTP chat API.

The scripted provider replays a JSON transcript turn by turn regardless of
tool results, which makes every harness behavior testable without a hosted
model. The HTTP provider speaks the common chat-completions wire format with
function-calling fields; its transport is injectable for tests.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

from .agent import (
    ImagePart,
    Message,
    ProviderError,
    ProviderTurn,
    TextPart,
    ToolCall,
    ToolSchema,
)

logger = logging.getLogger(__name__)


class TranscriptError(ValueError):
    """A scripted transcript failed validation at load time."""


class ScriptedProvider:
    """Replays a fixed list of turns, then terminates with a no-tool turn.

    Transcript format: JSON array; each element is either
    ``{"tool_calls": [{"name": ..., "arguments": {...}}]}`` (optionally with
    ``"text"``) or ``{"final": "..."}``.
    """

    def __init__(self, turns: list[dict], name: str = "<memory>") -> None:
        self.name = name
        self._turns = [self._parse_turn(i, t) for i, t in enumerate(turns)]
        self._cursor = 0

    @classmethod
    def from_file(cls, path: Path | str) -> "ScriptedProvider":
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise TranscriptError(f"cannot load transcript {path}: {exc}") from exc
        if not isinstance(raw, list):
            raise TranscriptError(f"transcript {path} must be a JSON array of turns")
        return cls(raw, name=str(path))

    def _parse_turn(self, index: int, turn: dict) -> ProviderTurn:
        if not isinstance(turn, dict):
            raise TranscriptError(f"{self.name}: turn {index} is not an object")
        known = {"tool_calls", "final", "text"}
        unknown = set(turn) - known
        if unknown:
            raise TranscriptError(
                f"{self.name}: turn {index} has unknown field(s) {sorted(unknown)};"
                f" expected {sorted(known)}"
            )
        if "final" in turn and "tool_calls" in turn:
            raise TranscriptError(
                f"{self.name}: turn {index} mixes 'final' and 'tool_calls'"
            )
        if "final" in turn:
            return ProviderTurn(assistant_text=str(turn["final"]))
        if "tool_calls" not in turn:
            raise TranscriptError(
                f"{self.name}: turn {index} needs 'final' or 'tool_calls'"
            )
        calls = []
        for j, call in enumerate(turn["tool_calls"]):
            if not isinstance(call, dict) or "name" not in call:
                raise TranscriptError(
                    f"{self.name}: turn {index} call {j} needs a 'name'"
                )
            arguments = call.get("arguments", {})
            if not isinstance(arguments, dict):
                raise TranscriptError(
                    f"{self.name}: turn {index} call {j} arguments must be an object"
                )
            calls.append(
                ToolCall(
                    name=call["name"],
                    arguments=arguments,
                    call_id=f"call_{index}_{j}",
                )
            )
        return ProviderTurn(
            assistant_text=turn.get("text"), tool_calls=tuple(calls)
        )

    def next_turn(
        self, messages: Sequence[Message], tools: Sequence[ToolSchema]
    ) -> ProviderTurn:
        if self._cursor >= len(self._turns):
            return ProviderTurn(assistant_text="script exhausted; stopping.")
        turn = self._turns[self._cursor]
        self._cursor += 1
        return turn

    @property
    def turns_total(self) -> int:
        return len(self._turns)


@dataclass(frozen=True)
class ChatEndpointConfig:
    base_url: str
    model: str
    api_key_env: str = "MODEL_API_KEY"
    timeout: float = 120.0
    temperature: Optional[float] = None


Transport = Callable[[str, dict, dict], dict]


def _requests_transport(url: str, payload: dict, headers: dict) -> dict:
    import requests

    try:
        response = requests.post(url, json=payload, headers=headers, timeout=300)
    except requests.RequestException as exc:
        raise ProviderError(f"transport failure: {exc}") from exc
    if response.status_code != 200:
        raise ProviderError(
            f"provider returned HTTP {response.status_code}: {response.text[:500]}"
        )
    return response.json()


class HttpChatProvider:
    """Chat-completions-style endpoint with tool-calling fields."""

    def __init__(
        self, config: ChatEndpointConfig, transport: Optional[Transport] = None
    ) -> None:
        self.config = config
        self._transport = transport or _requests_transport

    def next_turn(
        self, messages: Sequence[Message], tools: Sequence[ToolSchema]
    ) -> ProviderTurn:
        payload: dict = {
            "model": self.config.model,
            "messages": [_wire_message(m) for m in messages],
        }
        if tools:
            payload["tools"] = [
                {
                    "type": "function",
                    "function": {
                        "name": t.name,
                        "description": t.description,
                        "parameters": t.parameters,
                    },
                }
                for t in tools
            ]
        if self.config.temperature is not None:
            payload["temperature"] = self.config.temperature
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.config.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        response = self._transport(url, payload, headers)
        return _parse_chat_response(response)


def _wire_message(message: Message) -> dict:
    if message.role == "tool":
        return {
            "role": "tool",
            "tool_call_id": message.tool_call_id,
            "content": message.text,
        }
    if message.role == "assistant":
        wire: dict = {"role": "assistant", "content": message.text or None}
        if message.tool_calls:
            wire["tool_calls"] = [
                {
                    "id": call.call_id,
                    "type": "function",
                    "function": {
                        "name": call.name,
                        "arguments": json.dumps(call.arguments),
                    },
                }
                for call in message.tool_calls
            ]
        return wire
    parts = []
    for part in message.parts:
        if isinstance(part, TextPart):
            parts.append({"type": "text", "text": part.text})
        elif isinstance(part, ImagePart):
            parts.append(
                {
                    "type": "image_url",
                    "image_url": {"url": f"data:image/png;base64,{part.base64}"},
                }
            )
    if len(parts) == 1 and parts[0].get("type") == "text":
        return {"role": message.role, "content": parts[0]["text"]}
    return {"role": message.role, "content": parts}


def _parse_chat_response(response: dict) -> ProviderTurn:
    try:
        choice = response["choices"][0]["message"]
    except (KeyError, IndexError, TypeError) as exc:
        raise ProviderError(f"malformed provider response: {exc}") from exc
    calls = []
    for i, call in enumerate(choice.get("tool_calls") or []):
        function = call.get("function", {})
        raw_args = function.get("arguments", "{}")
        try:
            arguments = json.loads(raw_args) if isinstance(raw_args, str) else raw_args
        except json.JSONDecodeError:
            arguments = {"_raw": raw_args}
        calls.append(
            ToolCall(
                name=function.get("name", ""),
                arguments=arguments,
                call_id=call.get("id", f"call_{i}"),
            )
        )
    return ProviderTurn(
        assistant_text=choice.get("content"), tool_calls=tuple(calls)
    )
