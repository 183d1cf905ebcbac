"""Modular deep-search pipeline: planner, search agent, page reader, evaluation."""

from .config import ConfigError, PipelineConfig, load_config
from .core import (
    UNRESOLVED,
    AgentRoleConfig,
    AnswerQuestion,
    AskSubQuestion,
    EnrichedHit,
    EvidencePool,
    FetchStatus,
    FinalAnswer,
    Language,
    PlannerAction,
    QAPair,
    Question,
    ReasoningContext,
    Role,
    SamplingParams,
    SearchAgentAction,
    SearchHit,
    SearchIntent,
    WebSearch,
    canonical_url,
    dedup_insert,
    validate_context,
)
from .evaluation import (
    DatasetRecord,
    GroupBy,
    JudgedResult,
    ScoreReport,
    aggregate,
    judge,
    load_dataset,
    macro_from_groups,
    micro_from_groups,
    run_eval,
)
from .llm import (
    ChatMessage,
    ChatResult,
    FinishReason,
    HttpBackend,
    LlmGateway,
    ScriptedBackend,
    ScriptEntry,
)
from .orchestrator import RunResult, direct_answer, replay_trace, run_query
from .planner import Planner, PlannerState, PlanParseError, render_context
from .reader import CleanText, PageReader, ReadMode, ReaderConfig, clean_html, truncate_text
from .search_agent import SearchAgent, SearchAgentState
from .trace import EventKind, TraceError, TraceEvent, TraceRecorder
from .web import (
    FetchError,
    MockCorpus,
    MockFetcher,
    MockSearchClient,
    Provider,
    SearchProviderConfig,
    SerpAdapter,
    fetch_page,
)

__version__ = "0.1.0"
