"""Shared domain types: questions, reasoning context, search hits, evidence pool."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from urllib.parse import urlsplit, urlunsplit

# Maximum number of queries a single search intent may carry.
MAX_QUERIES_PER_SEARCH = 3

# Abstention sentinel a search agent may return instead of an answer.
UNRESOLVED = "UNRESOLVED"


class Language(str, Enum):
    EN = "EN"
    ZH = "ZH"
    OTHER = "other"

    @classmethod
    def parse(cls, value: str | None) -> "Language":
        if value is None:
            return cls.OTHER
        for member in cls:
            if value.lower() == member.value.lower():
                return member
        return cls.OTHER


class Role(str, Enum):
    PLANNER = "planner"
    SEARCHER = "searcher"
    READER = "reader"
    JUDGE = "judge"
    DIRECT = "direct"


class FetchStatus(str, Enum):
    OK = "ok"
    FETCH_FAILED = "fetch_failed"
    EXTRACT_FAILED = "extract_failed"


def is_absolute_url(url: str) -> bool:
    parts = urlsplit(url)
    return bool(parts.scheme) and bool(parts.netloc)


def canonical_url(url: str) -> str:
    """Canonical form used for dedup: lowercase scheme+host, no trailing slash, no fragment."""
    parts = urlsplit(url.strip())
    path = parts.path.rstrip("/")
    return urlunsplit((parts.scheme.lower(), parts.netloc.lower(), path, parts.query, ""))


@dataclass(frozen=True)
class Question:
    id: str
    text: str
    language: Language = Language.OTHER
    gold_answer: str | None = None
    source_urls: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("question text must be non-empty")
        for url in self.source_urls:
            if not is_absolute_url(url):
                raise ValueError(f"source url is not an absolute URL: {url!r}")


@dataclass(frozen=True)
class QAPair:
    sub_question: str
    answer: str
    step_index: int

    def __post_init__(self) -> None:
        if not self.sub_question.strip():
            raise ValueError("sub_question must be non-empty")
        if not self.answer.strip():
            raise ValueError("answer must be non-empty")
        if self.step_index < 1:
            raise ValueError("step_index must be >= 1")


@dataclass(frozen=True)
class ReasoningContext:
    """The planner's memory: the original question plus solved sub-question/answer pairs."""

    question: Question
    history: tuple[QAPair, ...] = ()

    def append(self, sub_question: str, answer: str) -> "ReasoningContext":
        pair = QAPair(sub_question, answer, len(self.history) + 1)
        return ReasoningContext(self.question, self.history + (pair,))


def validate_context(ctx: ReasoningContext) -> str | None:
    """Return None when all context invariants hold, else the first violation."""
    seen: set[str] = set()
    for position, pair in enumerate(ctx.history, start=1):
        if pair.step_index != position:
            return (
                f"non-consecutive step_index: expected {position}, "
                f"got {pair.step_index}"
            )
        if pair.sub_question in seen:
            return f"duplicate sub_question: {pair.sub_question!r}"
        seen.add(pair.sub_question)
    return None


@dataclass(frozen=True)
class SearchHit:
    url: str
    title: str = ""
    summary: str = ""

    def __post_init__(self) -> None:
        if not self.url:
            raise ValueError("hit url must be non-empty")


@dataclass(frozen=True)
class EnrichedHit:
    hit: SearchHit
    relevant_content: str = ""
    fetch_status: FetchStatus = FetchStatus.OK

    def __post_init__(self) -> None:
        if self.fetch_status is not FetchStatus.OK and self.relevant_content:
            raise ValueError("relevant_content must be empty unless fetch_status is ok")


@dataclass(frozen=True)
class EvidenceRound:
    round_index: int
    hits: tuple[EnrichedHit, ...] = ()

    def __post_init__(self) -> None:
        if self.round_index < 1:
            raise ValueError("round_index must be >= 1")


@dataclass(frozen=True)
class EvidencePool:
    """Deduplicated union of enriched hits across all search rounds for one sub-question."""

    rounds: tuple[EvidenceRound, ...] = ()

    def urls(self) -> set[str]:
        return {canonical_url(h.hit.url) for r in self.rounds for h in r.hits}

    def all_hits(self) -> list[EnrichedHit]:
        return [h for r in self.rounds for h in r.hits]


def dedup_insert(pool: EvidencePool, round_hits: list[EnrichedHit] | tuple[EnrichedHit, ...]) -> EvidencePool:
    """Append a new round, dropping hits whose url already appears anywhere in the pool.

    First occurrence wins; survivor order is preserved. URLs are compared in
    canonical form (case-insensitive scheme/host, trailing slash and fragment
    ignored).
    """
    known = pool.urls()
    survivors: list[EnrichedHit] = []
    for enriched in round_hits:
        key = canonical_url(enriched.hit.url)
        if key in known:
            continue
        known.add(key)
        survivors.append(enriched)
    new_round = EvidenceRound(len(pool.rounds) + 1, tuple(survivors))
    return EvidencePool(pool.rounds + (new_round,))


@dataclass(frozen=True)
class SearchIntent:
    """One to three search queries plus a prose intent guiding page-level extraction."""

    queries: tuple[str, ...]
    intent: str

    def __post_init__(self) -> None:
        if not 1 <= len(self.queries) <= MAX_QUERIES_PER_SEARCH:
            raise ValueError(
                f"search intent must carry 1..{MAX_QUERIES_PER_SEARCH} queries, "
                f"got {len(self.queries)}"
            )
        if any(not q.strip() for q in self.queries):
            raise ValueError("queries must be non-empty")
        if len(set(self.queries)) != len(self.queries):
            raise ValueError("queries must be pairwise distinct")
        if not self.intent.strip():
            raise ValueError("intent must be non-empty")


# Planner action variants.


@dataclass(frozen=True)
class AskSubQuestion:
    sub_question: str

    def __post_init__(self) -> None:
        if not self.sub_question.strip():
            raise ValueError("sub_question must be non-empty")


@dataclass(frozen=True)
class FinalAnswer:
    answer: str

    def __post_init__(self) -> None:
        if not self.answer.strip():
            raise ValueError("answer must be non-empty")


PlannerAction = AskSubQuestion | FinalAnswer


# Search-agent action variants.


@dataclass(frozen=True)
class WebSearch:
    intent: SearchIntent


@dataclass(frozen=True)
class AnswerQuestion:
    pass


SearchAgentAction = WebSearch | AnswerQuestion


@dataclass(frozen=True)
class SamplingParams:
    temperature: float = 0.6
    max_output_tokens: int = 4096

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be positive")


# Endpoint schemes understood by the backend builder: live chat-completions
# endpoints plus the deterministic scripted backend used in tests.
ENDPOINT_SCHEMES = ("http", "https", "scripted")


@dataclass(frozen=True)
class AgentRoleConfig:
    role: Role
    model_id: str
    endpoint: str
    sampling: SamplingParams = field(default_factory=SamplingParams)
    api_key_env: str = "LLM_API_KEY"

    def __post_init__(self) -> None:
        scheme = urlsplit(self.endpoint).scheme
        if scheme not in ENDPOINT_SCHEMES:
            raise ValueError(
                f"endpoint for role {self.role.value!r} must use one of "
                f"{ENDPOINT_SCHEMES}, got {self.endpoint!r}"
            )
