"""Dataset loading, LLM-as-judge scoring, and Pass@1 aggregation."""

from __future__ import annotations

import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from pathlib import Path
from typing import Callable, Mapping, Sequence

from .config import PipelineConfig
from .core import Language, Question, Role
from .llm import ChatBackend, LlmGateway, system, user
from .orchestrator import Fetcher, RunResult, build_backends, run_query
from .prompts import load_prompt
from .trace import dumps_events
from .web import SearchClient

logger = logging.getLogger(__name__)

JUDGE_ERROR = "JUDGE_ERROR"
EXACT_MATCH = "EXACT_MATCH"

_JUDGE_REPROMPT = (
    "Your previous reply could not be parsed. Reply again and end with "
    "exactly one line 'VERDICT: CORRECT' or 'VERDICT: INCORRECT'."
)


class DatasetError(Exception):
    pass


class GroupBy(str, Enum):
    LANGUAGE = "language"
    LEVEL = "level"
    NONE = "none"


@dataclass(frozen=True)
class DatasetRecord:
    id: str
    question: str
    answer: str
    urls: tuple[str, ...] = ()
    language: Language = Language.OTHER
    level: int | None = None

    def to_question(self) -> Question:
        return Question(
            id=self.id,
            text=self.question,
            language=self.language,
            gold_answer=self.answer,
            source_urls=self.urls,
        )


def load_dataset(path: str | Path) -> list[DatasetRecord]:
    """Load a JSONL dataset; errors name the offending line."""
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"dataset file not found: {path}")
    records: list[DatasetRecord] = []
    seen_ids: set[str] = set()
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"line {lineno}: unparseable JSON: {exc}") from exc
        for required in ("id", "question", "answer"):
            if required not in raw or not str(raw[required]).strip():
                raise DatasetError(f"line {lineno}: missing field {required!r}")
        record_id = str(raw["id"])
        if record_id in seen_ids:
            raise DatasetError(f"line {lineno}: duplicate id {record_id!r}")
        seen_ids.add(record_id)
        level = raw.get("level")
        records.append(
            DatasetRecord(
                id=record_id,
                question=str(raw["question"]),
                answer=str(raw["answer"]),
                urls=tuple(raw.get("urls") or ()),
                language=Language.parse(raw.get("language")),
                level=int(level) if level is not None else None,
            )
        )
    if not records:
        raise DatasetError("no records")
    counts: dict[str, int] = {}
    for record in records:
        counts[record.language.value] = counts.get(record.language.value, 0) + 1
    logger.info("loaded %d records (%s)", len(records), counts)
    return records


@dataclass(frozen=True)
class JudgedResult:
    record_id: str
    prediction: str
    correct: bool
    judge_raw: str


def normalize_answer(text: str) -> str:
    return re.sub(r"\s+", " ", text).strip().casefold()


def _parse_verdict(text: str) -> bool | None:
    for line in text.splitlines():
        stripped = line.strip().upper()
        if stripped.startswith("VERDICT:"):
            value = stripped[len("VERDICT:"):].strip()
            if value == "CORRECT":
                return True
            if value == "INCORRECT":
                return False
    return None


def judge(record: DatasetRecord, prediction: str, gateway: LlmGateway) -> JudgedResult:
    """Exact-match short-circuit, else the judge model decides; failures count as incorrect."""
    if normalize_answer(prediction) == normalize_answer(record.answer):
        return JudgedResult(record.id, prediction, True, EXACT_MATCH)
    prompt = load_prompt("judge.txt")
    body = (
        f"Question: {record.question}\n"
        f"Reference answer: {record.answer}\n"
        f"Predicted answer: {prediction}"
    )
    messages = [system(prompt), user(body)]
    result = gateway.chat(Role.JUDGE, messages)
    if not result.ok:
        return JudgedResult(record.id, prediction, False, JUDGE_ERROR)
    verdict = _parse_verdict(result.text)
    if verdict is None:
        retry = messages + [user(_JUDGE_REPROMPT)]
        result = gateway.chat(Role.JUDGE, retry)
        if not result.ok:
            return JudgedResult(record.id, prediction, False, JUDGE_ERROR)
        verdict = _parse_verdict(result.text)
    if verdict is None:
        return JudgedResult(record.id, prediction, False, result.text)
    return JudgedResult(record.id, prediction, verdict, result.text)


def round1(value: float | Decimal) -> float:
    """Display rounding: one decimal, half away from zero, exact on decimal inputs."""
    as_decimal = value if isinstance(value, Decimal) else Decimal(str(value))
    return float(as_decimal.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class GroupScore:
    n: int
    correct: int

    @property
    def accuracy(self) -> float:
        return 100.0 * self.correct / self.n if self.n else 0.0


@dataclass
class ScoreReport:
    """Accuracy percentages: sample-weighted (micro) and unweighted group mean (macro).

    Full precision is kept internally; rounding to one decimal happens only
    in the rounded_* accessors and the rendered table.
    """

    overall_micro: float
    overall_macro: float
    groups: dict[str, GroupScore] = field(default_factory=dict)

    @property
    def rounded_micro(self) -> float:
        return round1(self.overall_micro)

    @property
    def rounded_macro(self) -> float:
        return round1(self.overall_macro)

    def rounded_group(self, key: str) -> float:
        return round1(self.groups[key].accuracy)

    def format_table(self) -> str:
        lines = [f"{'group':<12} {'n':>6} {'accuracy':>9}"]
        for key in sorted(self.groups):
            score = self.groups[key]
            lines.append(f"{key:<12} {score.n:>6} {round1(score.accuracy):>8.1f}%")
        lines.append(f"{'micro':<12} {sum(g.n for g in self.groups.values()):>6} {self.rounded_micro:>8.1f}%")
        lines.append(f"{'macro':<12} {'':>6} {self.rounded_macro:>8.1f}%")
        return "\n".join(lines)

    def to_json(self) -> dict:
        return {
            "overall_micro": self.rounded_micro,
            "overall_macro": self.rounded_macro,
            "groups": {
                key: {"n": score.n, "accuracy": round1(score.accuracy)}
                for key, score in self.groups.items()
            },
        }


def _group_key(record: DatasetRecord, group_by: GroupBy) -> str:
    if group_by is GroupBy.LANGUAGE:
        return record.language.value
    if group_by is GroupBy.LEVEL:
        return f"level-{record.level}" if record.level is not None else "level-none"
    return "all"


def aggregate(
    results: Sequence[JudgedResult],
    records: Sequence[DatasetRecord],
    group_by: GroupBy = GroupBy.NONE,
) -> ScoreReport:
    """Fold judged results into micro/macro accuracy with a per-group breakdown."""
    by_id = {record.id: record for record in records}
    counts: dict[str, list[int]] = {}
    for result in results:
        record = by_id.get(result.record_id)
        if record is None:
            raise ValueError(f"judged result without a dataset record: {result.record_id!r}")
        bucket = counts.setdefault(_group_key(record, group_by), [0, 0])
        bucket[0] += 1
        bucket[1] += int(result.correct)
    groups = {key: GroupScore(n=pair[0], correct=pair[1]) for key, pair in counts.items()}
    total = sum(score.n for score in groups.values())
    correct = sum(score.correct for score in groups.values())
    micro = 100.0 * correct / total if total else 0.0
    macro = (
        sum(score.accuracy for score in groups.values()) / len(groups) if groups else 0.0
    )
    return ScoreReport(overall_micro=micro, overall_macro=macro, groups=groups)


def micro_from_groups(groups: Mapping[str, tuple[float, int]]) -> float:
    """Sample-weighted overall from per-group (accuracy %, n) pairs, one decimal."""
    total = sum(n for _, n in groups.values())
    if not total:
        return 0.0
    weighted = sum(Decimal(str(acc)) * n for acc, n in groups.values())
    return round1(weighted / total)


def macro_from_groups(groups: Mapping[str, tuple[float, int]] | Sequence[float]) -> float:
    """Unweighted mean of group accuracies, one decimal."""
    if isinstance(groups, Mapping):
        accs = [acc for acc, _ in groups.values()]
    else:
        accs = list(groups)
    if not accs:
        return 0.0
    return round1(sum(Decimal(str(a)) for a in accs) / len(accs))


@dataclass
class RecordOutcome:
    record: DatasetRecord
    run: RunResult
    judged: JudgedResult
    trace_file: str | None = None


BackendFactory = Callable[[DatasetRecord], Mapping[Role, ChatBackend]]
SearchFactory = Callable[[DatasetRecord], SearchClient]


def run_eval(
    records: Sequence[DatasetRecord],
    cfg: PipelineConfig,
    parallelism: int = 1,
    out_dir: str | Path | None = None,
    backend_factory: BackendFactory | None = None,
    search_factory: SearchFactory | None = None,
    fetcher: Fetcher | None = None,
    group_by: GroupBy = GroupBy.LANGUAGE,
) -> tuple[ScoreReport, list[RecordOutcome]]:
    """Run the pipeline once per record, judge each answer, aggregate Pass@1.

    Each record gets fully isolated state (its own trace and, via the
    factories, its own backends). Individual failures count as incorrect and
    never abort the sweep.
    """
    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)

    def evaluate(record: DatasetRecord) -> RecordOutcome:
        try:
            backends = dict(backend_factory(record)) if backend_factory else build_backends(cfg)
            search_client = search_factory(record) if search_factory else None
            run = run_query(
                record.to_question(), cfg,
                backends=backends, search_client=search_client, fetcher=fetcher,
            )
        except Exception as exc:  # noqa: BLE001 - sweep must not abort
            logger.exception("run failed for record %s", record.id)
            run = RunResult(answer="", used_fallback=False)
            judged = JudgedResult(record.id, "", False, f"RUN_ERROR: {exc}")
            return RecordOutcome(record, run, judged)
        judge_gateway = LlmGateway(cfg.roles, backends, None)
        judged = judge(record, run.answer, judge_gateway)
        trace_file = None
        if out_path is not None:
            trace_file = str(out_path / f"trace_{record.id}.jsonl")
            Path(trace_file).write_text(dumps_events(run.trace), encoding="utf-8")
        return RecordOutcome(record, run, judged, trace_file)

    if parallelism > 1 and len(records) > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            outcomes = list(pool.map(evaluate, records))
    else:
        outcomes = [evaluate(record) for record in records]

    report = aggregate([o.judged for o in outcomes], records, group_by)
    if out_path is not None:
        manifest = [
            {
                "record_id": outcome.record.id,
                "prediction": outcome.judged.prediction,
                "correct": outcome.judged.correct,
                "used_fallback": outcome.run.used_fallback,
                "trace_file": outcome.trace_file,
            }
            for outcome in outcomes
        ]
        (out_path / "manifest.json").write_text(
            json.dumps(manifest, ensure_ascii=False, indent=2), encoding="utf-8"
        )
        (out_path / "report.json").write_text(
            json.dumps(report.to_json(), ensure_ascii=False, indent=2), encoding="utf-8"
        )
    return report, outcomes
