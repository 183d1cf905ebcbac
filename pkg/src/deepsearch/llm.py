"""Chat-completion access for every agent role, plus a deterministic scripted backend."""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

import requests

from .core import AgentRoleConfig, Role
from .trace import EventKind, TraceRecorder

logger = logging.getLogger(__name__)

DEFAULT_MAX_ATTEMPTS = 3
DEFAULT_TIMEOUT_S = 60.0


class ChatRole(str, Enum):
    SYSTEM = "system"
    USER = "user"
    ASSISTANT = "assistant"


class FinishReason(str, Enum):
    STOP = "stop"
    LENGTH = "length"
    ERROR = "error"


@dataclass(frozen=True)
class ChatMessage:
    role: ChatRole
    content: str

    def __post_init__(self) -> None:
        if not self.content and self.role is not ChatRole.ASSISTANT:
            raise ValueError("only assistant placeholder messages may be empty")


def system(content: str) -> ChatMessage:
    return ChatMessage(ChatRole.SYSTEM, content)


def user(content: str) -> ChatMessage:
    return ChatMessage(ChatRole.USER, content)


def assistant(content: str) -> ChatMessage:
    return ChatMessage(ChatRole.ASSISTANT, content)


@dataclass(frozen=True)
class TokenUsage:
    prompt_tokens: int = 0
    output_tokens: int = 0


@dataclass(frozen=True)
class ChatResult:
    """A backend completion. For error results, text carries the diagnostic."""

    text: str
    finish_reason: FinishReason = FinishReason.STOP
    usage: TokenUsage = field(default_factory=TokenUsage)

    @property
    def ok(self) -> bool:
        return self.finish_reason is not FinishReason.ERROR


def error_result(diagnostic: str) -> ChatResult:
    return ChatResult(text=diagnostic, finish_reason=FinishReason.ERROR)


class ChatBackend(Protocol):
    def complete(self, messages: Sequence[ChatMessage], cfg: AgentRoleConfig) -> ChatResult: ...


def _rough_tokens(text: str) -> int:
    # Crude 4-chars-per-token estimate; scripted runs have no real tokenizer.
    return max(0, len(text) // 4)


def _last_user_content(messages: Sequence[ChatMessage]) -> str | None:
    for message in reversed(messages):
        if message.role is ChatRole.USER:
            return message.content
    return None


@dataclass(frozen=True)
class ScriptEntry:
    reply: str
    match: str | None = None


class ScriptedBackend:
    """Replays a fixed script of replies, optionally gated on the last user message.

    Each call consumes one entry, in script order; the cursor advance is atomic
    with reply selection, so concurrent callers see a consistent sequence.
    """

    def __init__(self, script: Iterable[ScriptEntry | str]) -> None:
        self.script: tuple[ScriptEntry, ...] = tuple(
            e if isinstance(e, ScriptEntry) else ScriptEntry(reply=e) for e in script
        )
        self.cursor = 0
        self._lock = threading.Lock()

    @classmethod
    def from_jsonl(cls, path: str | Path) -> "ScriptedBackend":
        entries = []
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            record = json.loads(line)
            if "reply" not in record:
                raise ValueError(f"{path}: line {lineno}: script entry needs a 'reply' field")
            entries.append(ScriptEntry(reply=str(record["reply"]), match=record.get("match")))
        return cls(entries)

    def copy(self) -> "ScriptedBackend":
        """Fresh backend over the same script, cursor reset to the start."""
        return ScriptedBackend(self.script)

    def next_reply(self, messages: Sequence[ChatMessage]) -> ChatResult:
        with self._lock:
            if self.cursor >= len(self.script):
                return error_result("script exhausted")
            entry = self.script[self.cursor]
            self.cursor += 1
        if entry.match is not None:
            last = _last_user_content(messages) or ""
            if entry.match not in last:
                return error_result(
                    f"scripted reply expected pattern {entry.match!r} in last user message"
                )
        prompt_chars = sum(len(m.content) for m in messages)
        return ChatResult(
            text=entry.reply,
            finish_reason=FinishReason.STOP,
            usage=TokenUsage(prompt_chars // 4, _rough_tokens(entry.reply)),
        )

    def complete(self, messages: Sequence[ChatMessage], cfg: AgentRoleConfig) -> ChatResult:
        return self.next_reply(messages)


class HttpBackend:
    """Single-turn chat-completions client over HTTP.

    Retries only transport failures and 5xx responses, never well-formed
    completions; every failure mode maps to an error result.
    """

    def __init__(
        self,
        max_attempts: int = DEFAULT_MAX_ATTEMPTS,
        timeout_s: float = DEFAULT_TIMEOUT_S,
        backoff_s: float = 0.5,
        session: requests.Session | None = None,
    ) -> None:
        self.max_attempts = max(1, max_attempts)
        self.timeout_s = timeout_s
        self.backoff_s = backoff_s
        self._session = session or requests.Session()

    def complete(self, messages: Sequence[ChatMessage], cfg: AgentRoleConfig) -> ChatResult:
        payload = {
            "model": cfg.model_id,
            "messages": [{"role": m.role.value, "content": m.content} for m in messages],
            "temperature": cfg.sampling.temperature,
            "max_tokens": cfg.sampling.max_output_tokens,
        }
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(cfg.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"

        last_diag = "unreachable"
        for attempt in range(self.max_attempts):
            if attempt:
                time.sleep(min(self.backoff_s * 2 ** (attempt - 1), 5.0))
            try:
                response = self._session.post(
                    cfg.endpoint, json=payload, headers=headers, timeout=self.timeout_s
                )
            except requests.RequestException as exc:
                last_diag = f"transport failure: {exc}"
                logger.warning("chat transport failure (attempt %d): %s", attempt + 1, exc)
                continue
            if response.status_code >= 500:
                last_diag = f"server error: HTTP {response.status_code}"
                continue
            if response.status_code != 200:
                return error_result(f"HTTP {response.status_code}: {response.text[:500]}")
            return self._parse(response)
        return error_result(f"endpoint unreachable after {self.max_attempts} attempts: {last_diag}")

    def _parse(self, response: requests.Response) -> ChatResult:
        try:
            body = response.json()
            choice = body["choices"][0]
            text = choice["message"]["content"]
            if text is None:
                text = ""
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            return error_result(f"malformed chat response: {exc}")
        reason = FinishReason.LENGTH if choice.get("finish_reason") == "length" else FinishReason.STOP
        if reason is FinishReason.LENGTH and not text:
            return error_result("malformed chat response: length finish with empty text")
        usage = body.get("usage") or {}
        return ChatResult(
            text=text,
            finish_reason=reason,
            usage=TokenUsage(
                int(usage.get("prompt_tokens", 0) or 0),
                int(usage.get("completion_tokens", 0) or 0),
            ),
        )


def build_backend(cfg: AgentRoleConfig) -> ChatBackend:
    """Backend for a role config, dispatched on the endpoint scheme."""
    if cfg.endpoint.startswith("scripted:"):
        return ScriptedBackend.from_jsonl(cfg.endpoint[len("scripted:"):])
    return HttpBackend()


def _check_preconditions(messages: Sequence[ChatMessage]) -> str | None:
    if not messages:
        return "empty message list"
    if messages[-1].role is not ChatRole.USER:
        return "message list must end with a user message"
    system_positions = [i for i, m in enumerate(messages) if m.role is ChatRole.SYSTEM]
    if system_positions and system_positions != [0]:
        return "at most one system message is allowed, and only at the start"
    return None


class LlmGateway:
    """Uniform chat access for every agent role, recording each exchange in the trace.

    chat() never raises: precondition violations, transport and wire failures
    all map to a ChatResult with finish_reason=error.
    """

    def __init__(
        self,
        roles: Mapping[Role, AgentRoleConfig],
        backends: Mapping[Role, ChatBackend],
        trace: TraceRecorder | None = None,
    ) -> None:
        self._roles = dict(roles)
        self._backends = dict(backends)
        self._trace = trace

    def has_role(self, role: Role) -> bool:
        return role in self._backends and role in self._roles

    def chat(self, role: Role, messages: Sequence[ChatMessage]) -> ChatResult:
        violation = _check_preconditions(messages)
        if violation is not None:
            result = error_result(violation)
            self._record(role, messages, result)
            return result
        cfg = self._roles.get(role)
        backend = self._backends.get(role)
        if cfg is None or backend is None:
            result = error_result(f"no backend configured for role {role.value!r}")
            self._record(role, messages, result)
            return result
        try:
            result = backend.complete(messages, cfg)
        except Exception as exc:  # noqa: BLE001 - contract: chat never raises
            logger.exception("backend raised for role %s", role.value)
            result = error_result(f"backend failure: {exc}")
        self._record(role, messages, result)
        return result

    def _record(self, role: Role, messages: Sequence[ChatMessage], result: ChatResult) -> None:
        if self._trace is None:
            return
        self._trace.record(
            EventKind.BACKEND_CALL,
            {
                "role": role.value,
                "messages": [{"role": m.role.value, "content": m.content} for m in messages],
                "text": result.text,
                "finish_reason": result.finish_reason.value,
            },
        )
