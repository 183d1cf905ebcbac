"""Tool-augmented search agent: multi-round evidence gathering for one sub-question."""

from __future__ import annotations

from dataclasses import dataclass, replace

from .core import (
    MAX_QUERIES_PER_SEARCH,
    UNRESOLVED,
    AnswerQuestion,
    EvidencePool,
    ReasoningContext,
    Role,
    SearchAgentAction,
    SearchHit,
    SearchIntent,
    WebSearch,
    canonical_url,
    dedup_insert,
)
from .llm import LlmGateway, system, user
from .planner import render_context
from .prompts import load_prompt
from .reader import PageReader
from .trace import EventKind, TraceRecorder
from .web import SearchClient

DEFAULT_MAX_ROUNDS = 4

_INTENT_REPROMPT = (
    "Your previous reply could not be parsed. Reply again with 1 to 3 "
    "'QUERY: ' lines followed by exactly one 'INTENT: ' line, nothing else."
)

_DECIDE_REPROMPT = (
    "Your previous reply could not be parsed. Reply again with a line "
    "'ACTION: search' (plus QUERY/INTENT lines) or 'ACTION: answer'."
)


class IntentParseError(Exception):
    """Searcher completion yielded no usable queries/intent after one reprompt."""


@dataclass(frozen=True)
class SearchAgentState:
    sub_question: str
    context: ReasoningContext
    pool: EvidencePool
    round: int
    max_rounds: int

    def __post_init__(self) -> None:
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be positive")
        if not 0 <= self.round <= self.max_rounds:
            raise ValueError("round out of range")
        if len(self.pool.rounds) != self.round:
            raise ValueError("pool round count must equal round")


def _parse_action_line(text: str) -> str | None:
    for line in text.splitlines():
        stripped = line.strip()
        if stripped.lower().startswith("action:"):
            value = stripped.split(":", 1)[1].strip().lower()
            if value in ("search", "answer"):
                return value
    return None


def _parse_intent_fields(text: str) -> tuple[list[str], str, int] | None:
    """Extract QUERY lines and the INTENT line; returns (queries, intent, raw count)."""
    queries: list[str] = []
    intent: str | None = None
    raw_count = 0
    for line in text.splitlines():
        stripped = line.strip()
        if stripped.startswith("QUERY:"):
            payload = stripped[len("QUERY:"):].strip()
            if payload:
                raw_count += 1
                if payload not in queries:
                    queries.append(payload)
        elif stripped.startswith("INTENT:") and intent is None:
            payload = stripped[len("INTENT:"):].strip()
            if payload:
                intent = payload
    if not queries or intent is None:
        return None
    return queries, intent, raw_count


def _serialize_pool(pool: EvidencePool) -> str:
    """Evidence as seen by the searcher: urls and extracted content, never raw page text."""
    if not pool.rounds:
        return "(no evidence gathered yet)"
    lines: list[str] = []
    for round_record in pool.rounds:
        for enriched in round_record.hits:
            lines.append(f"[round {round_record.round_index}] {enriched.hit.url}")
            if enriched.relevant_content:
                lines.append(enriched.relevant_content)
            else:
                lines.append(f"(no relevant content: {enriched.fetch_status.value})")
    return "\n".join(lines)


class SearchAgent:
    """Formulates search intents, gathers evidence through the reader, answers."""

    def __init__(
        self,
        gateway: LlmGateway,
        search_client: SearchClient,
        page_reader: PageReader,
        trace: TraceRecorder | None = None,
        max_rounds: int = DEFAULT_MAX_ROUNDS,
        top_k: int = 5,
    ) -> None:
        self._gateway = gateway
        self._search = search_client
        self._reader = page_reader
        self._trace = trace
        self.max_rounds = max_rounds
        self.top_k = top_k
        self._decide_prompt = load_prompt("searcher_decide.txt")
        self._intent_prompt = load_prompt("searcher_intent.txt")
        self._answer_prompt = load_prompt("searcher_answer.txt")
        self._pending_warnings: list[str] = []
        self._notes: list[str] = []

    def initial_state(self, sub_question: str, context: ReasoningContext) -> SearchAgentState:
        return SearchAgentState(sub_question, context, EvidencePool(), 0, self.max_rounds)

    def _situation(self, state: SearchAgentState) -> str:
        return (
            f"Sub-question: {state.sub_question}\n\n"
            f"History:\n{render_context(state.context)}\n\n"
            f"Evidence so far (round {state.round} of at most {state.max_rounds}):\n"
            f"{_serialize_pool(state.pool)}"
        )

    def decide_next_action(self, state: SearchAgentState) -> SearchAgentAction:
        """Search again or answer; the round cap forces answering regardless of the model."""
        if state.round >= state.max_rounds:
            return AnswerQuestion()
        messages = [system(self._decide_prompt), user(self._situation(state))]
        result = self._gateway.chat(Role.SEARCHER, messages)
        action = _parse_action_line(result.text) if result.ok else None
        if action is None:
            retry = messages + [user(_DECIDE_REPROMPT)]
            result = self._gateway.chat(Role.SEARCHER, retry)
            action = _parse_action_line(result.text) if result.ok else None
        if action is None or action == "answer":
            if action is None:
                self._notes.append("action line unparseable; answering (fail-closed)")
            return AnswerQuestion()
        try:
            intent = self.formulate_search(state, completion=result.text)
        except IntentParseError:
            self._notes.append("search intent unparseable; answering (forced)")
            return AnswerQuestion()
        return WebSearch(intent)

    def formulate_search(self, state: SearchAgentState, completion: str | None = None) -> SearchIntent:
        """Parse 1..3 queries and an intent, asking the searcher model when needed.

        A completion already at hand (from the action decision) is parsed
        first; otherwise, or when it lacks the fields, the model is asked
        once more in the strict format.
        """
        if state.round >= state.max_rounds:
            raise ValueError("formulate_search called at the round cap")
        parsed = _parse_intent_fields(completion) if completion is not None else None
        if parsed is None:
            messages = [
                system(self._intent_prompt),
                user(f"{self._situation(state)}\n\n{_INTENT_REPROMPT if completion else ''}".strip()),
            ]
            result = self._gateway.chat(Role.SEARCHER, messages)
            parsed = _parse_intent_fields(result.text) if result.ok else None
        if parsed is None:
            raise IntentParseError("no usable QUERY/INTENT lines after one reprompt")
        queries, intent_text, raw_count = parsed
        kept = tuple(queries[:MAX_QUERIES_PER_SEARCH])
        if raw_count > MAX_QUERIES_PER_SEARCH:
            self._pending_warnings.append(
                f"model emitted {raw_count} queries; kept the first {len(kept)}"
            )
        return SearchIntent(kept, intent_text)

    def run_round(self, state: SearchAgentState, intent: SearchIntent) -> SearchAgentState:
        """Search every query, union the hits (first-seen order, top_k cap), read, pool."""
        if state.round >= state.max_rounds:
            raise ValueError("run_round called at the round cap")
        warnings = self._pending_warnings
        self._pending_warnings = []

        merged: list[SearchHit] = []
        seen: set[str] = set()
        for query in intent.queries:
            hits = self._search.search(query)
            if self._search.last_error:
                warnings.append(f"search failed for {query!r}: {self._search.last_error}")
            for hit in hits:
                key = canonical_url(hit.url)
                if key in seen:
                    continue
                seen.add(key)
                merged.append(hit)
        kept = merged[: self.top_k]

        enriched = self._reader.read_pages(kept, intent)
        pool = dedup_insert(state.pool, enriched)
        new_state = replace(state, pool=pool, round=state.round + 1)
        if self._trace is not None:
            self._trace.record(
                EventKind.SEARCH_ROUND,
                {
                    "sub_question": state.sub_question,
                    "round_index": new_state.round,
                    "queries": list(intent.queries),
                    "intent": intent.intent,
                    "urls": [h.url for h in kept],
                    "empty": not kept,
                    "warnings": warnings,
                },
            )
        return new_state

    def answer_subquestion(self, state: SearchAgentState) -> str:
        """Answer from the pooled evidence; abstains with the UNRESOLVED sentinel."""
        messages = [
            system(self._answer_prompt),
            user(
                f"Sub-question: {state.sub_question}\n\n"
                f"Evidence:\n{_serialize_pool(state.pool)}\n\n"
                f"History:\n{render_context(state.context)}"
            ),
        ]
        result = self._gateway.chat(Role.SEARCHER, messages)
        if not result.ok:
            return UNRESOLVED
        answer = result.text.strip()
        return answer if answer else UNRESOLVED

    def solve(self, sub_question: str, context: ReasoningContext) -> tuple[str, SearchAgentState]:
        """Full loop for one sub-question: decide, search rounds, answer."""
        state = self.initial_state(sub_question, context)
        self._pending_warnings = []
        self._notes = []
        while True:
            action = self.decide_next_action(state)
            if isinstance(action, AnswerQuestion):
                break
            state = self.run_round(state, action.intent)
        answer = self.answer_subquestion(state)
        if self._trace is not None:
            payload = {
                "sub_question": sub_question,
                "phase": "answer",
                "answer": answer,
                "rounds_used": state.round,
            }
            if self._notes:
                payload["notes"] = list(self._notes)
            self._trace.record(EventKind.SEARCH_ROUND, payload)
        return answer, state
