"""Wires the three agents into the full pipeline: caps, fallback, traces, replay."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

from .config import PipelineConfig
from .core import AskSubQuestion, FinalAnswer, Question, Role
from .llm import ChatBackend, LlmGateway, build_backend, user
from .planner import Planner, PlanParseError, initial_state
from .reader import PageReader
from .search_agent import SearchAgent
from .trace import (
    EventKind,
    TraceError,
    TraceEvent,
    TraceRecorder,
    load_events,
    validate_events,
)
from .web import LiveFetcher, MockCorpus, MockFetcher, MockSearchClient, Provider, SearchClient, make_search_client

logger = logging.getLogger(__name__)

Fetcher = Callable[[str], str]


@dataclass
class RunResult:
    answer: str
    used_fallback: bool
    trace: list[TraceEvent] = field(default_factory=list)
    steps_used: int = 0
    rounds_total: int = 0


def build_backends(cfg: PipelineConfig) -> dict[Role, ChatBackend]:
    return {role: build_backend(role_cfg) for role, role_cfg in cfg.roles.items()}


def _build_search(cfg: PipelineConfig) -> tuple[SearchClient, Fetcher]:
    if cfg.search.provider is Provider.MOCK:
        client = make_search_client(cfg.search)
        assert isinstance(client, MockSearchClient)
        return client, MockFetcher(client.corpus)
    return make_search_client(cfg.search), LiveFetcher(cfg.search.timeout_ms)


def direct_answer(question: Question, gateway: LlmGateway) -> str:
    """One chat call with the bare question; no web access happens on this path."""
    role = Role.DIRECT if gateway.has_role(Role.DIRECT) else Role.PLANNER
    result = gateway.chat(role, [user(question.text)])
    if not result.ok:
        return ""
    return result.text.strip()


def run_query(
    question: Question,
    cfg: PipelineConfig,
    backends: Mapping[Role, ChatBackend] | None = None,
    search_client: SearchClient | None = None,
    fetcher: Fetcher | None = None,
    trace_path: str | Path | None = None,
) -> RunResult:
    """Alternate planning and sub-question solving until a final answer or exhaustion.

    Backends, search client, and fetcher default to whatever the config
    declares; tests inject scripted ones directly.
    """
    trace = TraceRecorder()
    if backends is None:
        backends = build_backends(cfg)
    if search_client is None:
        search_client, default_fetcher = _build_search(cfg)
        fetcher = fetcher or default_fetcher
    if fetcher is None:
        if isinstance(search_client, MockSearchClient):
            fetcher = MockFetcher(search_client.corpus)
        else:
            fetcher = LiveFetcher(cfg.search.timeout_ms)

    gateway = LlmGateway(cfg.roles, backends, trace)
    page_reader = PageReader(fetcher, gateway, cfg.reader, trace, max_workers=cfg.search.top_k)
    agent = SearchAgent(
        gateway, search_client, page_reader, trace,
        max_rounds=cfg.max_rounds, top_k=cfg.search.top_k,
    )
    planner = Planner(gateway, trace)

    state = initial_state(question, cfg.max_steps)
    answer: str | None = None
    rounds_total = 0
    exhausted_reason = "max_steps reached"
    while state.step < cfg.max_steps:
        try:
            action = planner.plan_next(state)
        except PlanParseError:
            exhausted_reason = "planner output unparseable"
            break
        if isinstance(action, FinalAnswer):
            answer = action.answer
            break
        assert isinstance(action, AskSubQuestion)
        sub_answer, agent_state = agent.solve(action.sub_question, state.context)
        rounds_total += agent_state.round
        state = planner.append_result(state, action.sub_question, sub_answer)

    used_fallback = False
    exhausted = answer is None
    if answer is None:
        if cfg.fallback_enabled:
            trace.record(EventKind.FALLBACK, {"reason": exhausted_reason})
            answer = direct_answer(question, gateway)
            used_fallback = True
        else:
            answer = ""

    final_payload = {
        "answer": answer,
        "used_fallback": used_fallback,
        "steps_used": state.step,
        "rounds_total": rounds_total,
        "exhausted": exhausted,
    }
    if exhausted:
        final_payload["reason"] = exhausted_reason
    trace.record(EventKind.FINAL, final_payload)
    if trace_path is not None:
        trace.write_jsonl(trace_path)
    return RunResult(
        answer=answer,
        used_fallback=used_fallback,
        trace=trace.events,
        steps_used=state.step,
        rounds_total=rounds_total,
    )


def replay_trace(path: str | Path) -> RunResult:
    """Rebuild a RunResult from a trace file without touching any backend."""
    events = load_events(path)
    violation = validate_events(events)
    if violation is not None:
        raise TraceError(violation)
    final = events[-1]
    payload = final.payload
    try:
        return RunResult(
            answer=str(payload["answer"]),
            used_fallback=bool(payload["used_fallback"]),
            trace=events,
            steps_used=int(payload["steps_used"]),
            rounds_total=int(payload["rounds_total"]),
        )
    except KeyError as exc:
        raise TraceError(f"final event missing field: {exc}") from exc
