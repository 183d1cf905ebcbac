"""Shared fixtures: scripted role backends, mock corpora, pipeline configs."""

from __future__ import annotations

import pytest

from deepsearch.config import PipelineConfig
from deepsearch.core import AgentRoleConfig, Language, Question, Role, SamplingParams
from deepsearch.llm import LlmGateway, ScriptedBackend, ScriptEntry
from deepsearch.reader import ReadMode, ReaderConfig
from deepsearch.trace import TraceRecorder
from deepsearch.web import MockCorpus, MockFetcher, MockSearchClient, Provider, SearchProviderConfig

TEST_SAMPLING = SamplingParams(temperature=0.0, max_output_tokens=4096)


def role_cfg(role: Role) -> AgentRoleConfig:
    return AgentRoleConfig(
        role=role,
        model_id="test-model",
        endpoint="scripted:unused.jsonl",
        sampling=TEST_SAMPLING,
    )


def scripted(*entries: str | ScriptEntry) -> ScriptedBackend:
    return ScriptedBackend(entries)


def make_gateway(
    planner: ScriptedBackend | None = None,
    searcher: ScriptedBackend | None = None,
    reader: ScriptedBackend | None = None,
    judge: ScriptedBackend | None = None,
    direct: ScriptedBackend | None = None,
    trace: TraceRecorder | None = None,
) -> LlmGateway:
    backends = {}
    roles = {}
    for role, backend in (
        (Role.PLANNER, planner),
        (Role.SEARCHER, searcher),
        (Role.READER, reader),
        (Role.JUDGE, judge),
        (Role.DIRECT, direct),
    ):
        if backend is not None:
            backends[role] = backend
            roles[role] = role_cfg(role)
    return LlmGateway(roles, backends, trace)


def make_corpus(pages: list[tuple[str, str, str]]) -> MockCorpus:
    corpus = MockCorpus()
    for url, title, body in pages:
        corpus.add(url, title, body)
    return corpus


def make_pipeline_cfg(
    top_k: int = 5,
    max_steps: int = 8,
    max_rounds: int = 4,
    mode: ReadMode = ReadMode.FULL,
    fallback_enabled: bool = True,
    with_direct: bool = False,
) -> PipelineConfig:
    roles = {
        Role.PLANNER: role_cfg(Role.PLANNER),
        Role.SEARCHER: role_cfg(Role.SEARCHER),
        Role.READER: role_cfg(Role.READER),
    }
    if with_direct:
        roles[Role.DIRECT] = role_cfg(Role.DIRECT)
    return PipelineConfig(
        roles=roles,
        reader=ReaderConfig(mode=mode),
        search=SearchProviderConfig(provider=Provider.MOCK, top_k=top_k),
        max_steps=max_steps,
        max_rounds=max_rounds,
        fallback_enabled=fallback_enabled,
    )


def make_question(text: str = "What is being asked?", qid: str = "q1") -> Question:
    return Question(id=qid, text=text, language=Language.EN)


PRESIDENTS_PAGES = [
    (
        "https://example.org/obama",
        "Barack Obama",
        "<p>Barack Obama was born in Honolulu, Hawaii, the westernmost birth "
        "city of any United States president.</p>",
    ),
    (
        "https://example.org/hawaii",
        "Presidents born in Hawaii",
        "<p>Barack Obama is the only president born in Hawaii.</p>",
    ),
    (
        "https://example.org/presidents/birthplaces",
        "List of US presidents birthplaces",
        "<p>Birthplaces of United States presidents by state and city.</p>",
    ),
    (
        "https://example.org/geography",
        "Westernmost cities of the United States",
        "<p>Honolulu is among the westernmost major cities in the United States.</p>",
    ),
    (
        "https://example.org/trivia",
        "Presidential trivia",
        "<p>Trivia about presidents, birthplaces and more.</p>",
    ),
]


@pytest.fixture
def presidents_corpus() -> MockCorpus:
    return make_corpus(PRESIDENTS_PAGES)


@pytest.fixture
def presidents_search(presidents_corpus: MockCorpus) -> MockSearchClient:
    return MockSearchClient(presidents_corpus, top_k=5)


@pytest.fixture
def presidents_fetcher(presidents_corpus: MockCorpus) -> MockFetcher:
    return MockFetcher(presidents_corpus)
