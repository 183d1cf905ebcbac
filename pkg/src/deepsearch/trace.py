"""Append-only execution traces: every agent step, tool call, and backend exchange."""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Iterable


class EventKind(str, Enum):
    PLANNER_STEP = "planner_step"
    SEARCH_ROUND = "search_round"
    PAGE_READ = "page_read"
    BACKEND_CALL = "backend_call"
    FALLBACK = "fallback"
    FINAL = "final"


@dataclass(frozen=True)
class TraceEvent:
    seq: int
    timestamp: str
    kind: EventKind
    payload: dict[str, Any]


class TraceError(Exception):
    """A trace file violates a structural invariant; the message names the first violation."""


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


class TraceRecorder:
    """Collects trace events with a strictly increasing sequence number.

    Safe for concurrent recording; seq assignment is atomic with insertion,
    so seq order equals list order.
    """

    def __init__(self) -> None:
        self._events: list[TraceEvent] = []
        self._lock = threading.Lock()
        self._next_seq = 1

    def record(self, kind: EventKind, payload: dict[str, Any]) -> TraceEvent:
        with self._lock:
            event = TraceEvent(self._next_seq, _now_iso(), kind, payload)
            self._next_seq += 1
            self._events.append(event)
            return event

    @property
    def events(self) -> list[TraceEvent]:
        with self._lock:
            return list(self._events)

    def write_jsonl(self, path: str | Path) -> None:
        Path(path).write_text(dumps_events(self.events), encoding="utf-8")


def event_to_json(event: TraceEvent) -> str:
    record = {
        "seq": event.seq,
        "timestamp": event.timestamp,
        "kind": event.kind.value,
        "payload": event.payload,
    }
    return json.dumps(record, ensure_ascii=False, sort_keys=True)


def event_from_json(line: str) -> TraceEvent:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise TraceError(f"unparseable trace line: {exc}") from exc
    try:
        return TraceEvent(
            seq=int(record["seq"]),
            timestamp=str(record["timestamp"]),
            kind=EventKind(record["kind"]),
            payload=dict(record["payload"]),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise TraceError(f"malformed trace event: {exc}") from exc


def dumps_events(events: Iterable[TraceEvent]) -> str:
    return "".join(event_to_json(e) + "\n" for e in events)


def load_events(path: str | Path) -> list[TraceEvent]:
    events = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            events.append(event_from_json(line))
        except TraceError as exc:
            raise TraceError(f"line {lineno}: {exc}") from exc
    return events


def validate_events(events: list[TraceEvent]) -> str | None:
    """Return None when the trace is structurally sound, else the first violation."""
    if not events:
        return "empty trace"
    prev = None
    for event in events:
        if prev is not None and event.seq <= prev:
            return f"non-monotone seq: {event.seq} after {prev}"
        prev = event.seq
    finals = [e for e in events if e.kind is EventKind.FINAL]
    if not finals:
        return "no final event"
    if len(finals) > 1:
        return "multiple final events"
    if events[-1].kind is not EventKind.FINAL:
        return "final event is not last"
    return None


def fingerprint(events: Iterable[TraceEvent]) -> str:
    """Deterministic serialization of a trace with timestamps excluded.

    Two runs against identical scripted backends must produce identical
    fingerprints; wall-clock timestamps are the only permitted difference.
    """
    stripped = [
        {"seq": e.seq, "kind": e.kind.value, "payload": e.payload} for e in events
    ]
    return json.dumps(stripped, ensure_ascii=False, sort_keys=True)
