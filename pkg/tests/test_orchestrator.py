"""Full pipeline runs: scripted end-to-end, fallback semantics, trace replay."""

from __future__ import annotations

import pytest

from deepsearch.core import Role
from deepsearch.llm import LlmGateway, ScriptEntry
from deepsearch.orchestrator import RunResult, direct_answer, replay_trace, run_query
from deepsearch.trace import EventKind, TraceError, dumps_events, fingerprint, load_events
from deepsearch.web import MockFetcher, MockSearchClient

from conftest import (
    PRESIDENTS_PAGES,
    make_corpus,
    make_gateway,
    make_pipeline_cfg,
    make_question,
    role_cfg,
    scripted,
)

PLANNER_SCRIPT = (
    "The question asks for a birthplace; find it first.\n"
    "SUBQ: What is the westernmost city in the United States where a US president was born?",
    "FINAL: Honolulu",
)

SEARCHER_SCRIPT = (
    "ACTION: search\n"
    "QUERY: westernmost city US president born\n"
    "QUERY: presidents born in Hawaii\n"
    "QUERY: list of US presidents birthplaces\n"
    "INTENT: Identify which US president was born furthest west and in which city.",
    "ACTION: answer",
    "Honolulu, Hawaii",
)

READER_SCRIPT = (
    ScriptEntry(reply="FACT: Barack Obama was born in Honolulu, Hawaii.", match="example.org/obama"),
    ScriptEntry(reply="Barack Obama is the only US president born in Hawaii.", match="example.org/hawaii"),
    ScriptEntry(reply="NO_RELEVANT_CONTENT", match="example.org/presidents/birthplaces"),
    ScriptEntry(reply="Honolulu is among the westernmost major US cities.", match="example.org/geography"),
    ScriptEntry(reply="NO_RELEVANT_CONTENT", match="example.org/trivia"),
)

QUESTION = make_question("What is the westernmost US city where a president was born?", "case-study")


def _scripted_run(trace_path=None, **cfg_kw) -> RunResult:
    corpus = make_corpus(PRESIDENTS_PAGES)
    cfg = make_pipeline_cfg(**cfg_kw)
    return run_query(
        QUESTION,
        cfg,
        backends={
            Role.PLANNER: scripted(*PLANNER_SCRIPT),
            Role.SEARCHER: scripted(*SEARCHER_SCRIPT),
            Role.READER: scripted(*READER_SCRIPT),
        },
        search_client=MockSearchClient(corpus, top_k=5),
        fetcher=MockFetcher(corpus),
        trace_path=trace_path,
    )


class TestScriptedScenario:
    def test_answer_and_counters(self):
        result = _scripted_run()
        assert result.answer == "Honolulu"
        assert result.used_fallback is False
        assert result.steps_used == 1
        assert result.rounds_total == 1

    def test_trace_structure(self):
        result = _scripted_run()
        kinds = [e.kind for e in result.trace]
        assert kinds[-1] is EventKind.FINAL
        assert kinds.count(EventKind.PAGE_READ) == 5
        assert EventKind.SEARCH_ROUND in kinds
        assert EventKind.FALLBACK not in kinds
        final = result.trace[-1]
        assert final.payload["answer"] == result.answer

    def test_byte_stable_across_runs(self):
        prints = {fingerprint(_scripted_run().trace) for _ in range(10)}
        assert len(prints) == 1


class TestFallback:
    def _exhausting_scripts(self):
        # Planner keeps asking; searcher always errors out of evidence; every
        # sub-answer is UNRESOLVED, so no FINAL ever arrives.
        planner = scripted(*[f"SUBQ: attempt {i}?" for i in range(1, 4)])
        searcher = scripted(*["ACTION: answer", "UNRESOLVED"] * 3)
        return planner, searcher

    def test_exhaustion_triggers_direct_answer_once(self):
        planner, searcher = self._exhausting_scripts()
        direct = scripted("X")
        cfg = make_pipeline_cfg(max_steps=3, with_direct=True)
        result = run_query(
            QUESTION,
            cfg,
            backends={
                Role.PLANNER: planner,
                Role.SEARCHER: searcher,
                Role.READER: scripted(),
                Role.DIRECT: direct,
            },
            search_client=MockSearchClient(make_corpus([]), top_k=5),
        )
        assert result.used_fallback is True
        assert result.answer == "X"
        assert result.steps_used == 3
        fallback_events = [e for e in result.trace if e.kind is EventKind.FALLBACK]
        assert len(fallback_events) == 1
        assert direct.cursor == 1  # exactly one direct call

    def test_fallback_uses_planner_when_no_direct_role(self):
        planner = scripted("SUBQ: q?", "from planner in direct mode")
        searcher = scripted("ACTION: answer", "UNRESOLVED")
        cfg = make_pipeline_cfg(max_steps=1)
        result = run_query(
            QUESTION,
            cfg,
            backends={Role.PLANNER: planner, Role.SEARCHER: searcher, Role.READER: scripted()},
            search_client=MockSearchClient(make_corpus([]), top_k=5),
        )
        assert result.used_fallback is True
        assert result.answer == "from planner in direct mode"

    def test_no_fallback_gives_empty_answer(self):
        planner, searcher = self._exhausting_scripts()
        cfg = make_pipeline_cfg(max_steps=3, fallback_enabled=False)
        result = run_query(
            QUESTION,
            cfg,
            backends={Role.PLANNER: planner, Role.SEARCHER: searcher, Role.READER: scripted()},
            search_client=MockSearchClient(make_corpus([]), top_k=5),
        )
        assert result.answer == ""
        assert result.used_fallback is False
        final = result.trace[-1]
        assert final.payload["exhausted"] is True
        assert not any(e.kind is EventKind.FALLBACK for e in result.trace)

    def test_planner_parse_escalation_falls_back(self):
        cfg = make_pipeline_cfg(with_direct=True)
        result = run_query(
            QUESTION,
            cfg,
            backends={
                Role.PLANNER: scripted("gibberish", "more gibberish"),
                Role.SEARCHER: scripted(),
                Role.READER: scripted(),
                Role.DIRECT: scripted("rescued"),
            },
            search_client=MockSearchClient(make_corpus([]), top_k=5),
        )
        assert result.used_fallback is True
        assert result.answer == "rescued"
        assert result.steps_used == 0


class TestDirectAnswer:
    def test_scripted_direct(self):
        gateway = make_gateway(direct=scripted("42"))
        assert direct_answer(QUESTION, gateway) == "42"

    def test_backend_error_gives_empty(self):
        gateway = make_gateway(direct=scripted())
        assert direct_answer(QUESTION, gateway) == ""

    def test_no_web_events_in_direct_runs(self):
        planner, searcher = scripted("junk", "junk"), scripted()
        cfg = make_pipeline_cfg(with_direct=True)
        result = run_query(
            QUESTION,
            cfg,
            backends={
                Role.PLANNER: planner,
                Role.SEARCHER: searcher,
                Role.READER: scripted(),
                Role.DIRECT: scripted("direct only"),
            },
            search_client=MockSearchClient(make_corpus([]), top_k=5),
        )
        assert result.used_fallback is True
        web_kinds = {EventKind.SEARCH_ROUND, EventKind.PAGE_READ}
        assert not any(e.kind in web_kinds for e in result.trace)


class TestReplay:
    def test_round_trip_reconstructs_run_result(self, tmp_path):
        path = tmp_path / "trace.jsonl"
        original = _scripted_run(trace_path=path)
        replayed = replay_trace(path)
        assert replayed.answer == original.answer
        assert replayed.used_fallback == original.used_fallback
        assert replayed.steps_used == original.steps_used
        assert replayed.rounds_total == original.rounds_total
        assert fingerprint(replayed.trace) == fingerprint(original.trace)

    def test_shuffled_seq_detected(self, tmp_path):
        path = tmp_path / "trace.jsonl"
        _scripted_run(trace_path=path)
        events = load_events(path)
        corrupt = tmp_path / "shuffled.jsonl"
        corrupt.write_text(dumps_events([events[1], events[0]] + events[2:]), encoding="utf-8")
        with pytest.raises(TraceError, match="non-monotone seq"):
            replay_trace(corrupt)

    def test_missing_final_detected(self, tmp_path):
        path = tmp_path / "trace.jsonl"
        _scripted_run(trace_path=path)
        events = load_events(path)
        corrupt = tmp_path / "nofinal.jsonl"
        corrupt.write_text(dumps_events(events[:-1]), encoding="utf-8")
        with pytest.raises(TraceError, match="no final event"):
            replay_trace(corrupt)

    def test_replay_never_calls_backends(self, tmp_path):
        path = tmp_path / "trace.jsonl"
        _scripted_run(trace_path=path)
        # No backends exist here at all; replay must still succeed.
        result = replay_trace(path)
        assert result.answer == "Honolulu"
