"""Webpage reading agent: fetch, clean, truncate, and extract intent-relevant content."""

from __future__ import annotations

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

from .core import EnrichedHit, FetchStatus, Role, SearchHit, SearchIntent
from .htmltext import clean_html, truncate_text
from .llm import LlmGateway, system, user
from .prompts import load_prompt
from .trace import EventKind, TraceRecorder
from .web import FetchError

__all__ = [
    "CleanText",
    "ExtractionFailed",
    "NO_CONTENT_SENTINEL",
    "PageReader",
    "ReadMode",
    "ReaderConfig",
    "clean_html",
    "truncate_text",
]

logger = logging.getLogger(__name__)

DEFAULT_MAX_CHARS = 65_536
MIN_MAX_CHARS = 1_024
DEFAULT_MAX_SELECTED = 3

# Reply a reader model must give when a page holds nothing relevant.
NO_CONTENT_SENTINEL = "NO_RELEVANT_CONTENT"


class ReadMode(str, Enum):
    FULL = "full"
    SELECTIVE = "selective"


@dataclass(frozen=True)
class ReaderConfig:
    max_chars: int = DEFAULT_MAX_CHARS
    mode: ReadMode = ReadMode.FULL
    max_selected: int = DEFAULT_MAX_SELECTED

    def __post_init__(self) -> None:
        if self.max_chars < MIN_MAX_CHARS:
            raise ValueError(f"max_chars must be >= {MIN_MAX_CHARS}")
        if self.max_selected < 1:
            raise ValueError("max_selected must be positive")


@dataclass(frozen=True)
class CleanText:
    text: str
    source_url: str
    truncated: bool


class ExtractionFailed(Exception):
    """Reader backend errored while extracting relevant content."""


class PageReader:
    """Turns search hits into enriched hits: fetch, clean, truncate, extract.

    In full mode every hit's page is read; in selective mode a model call
    picks at most max_selected hits from metadata and only those are fetched.
    Per-page failures become statuses, never dropped records. Fetches fan out
    concurrently; extraction calls run sequentially in input order so scripted
    backends stay deterministic.
    """

    def __init__(
        self,
        fetcher: Callable[[str], str],
        gateway: LlmGateway,
        cfg: ReaderConfig,
        trace: TraceRecorder | None = None,
        max_workers: int = 5,
    ) -> None:
        self._fetch = fetcher
        self._gateway = gateway
        self.cfg = cfg
        self._trace = trace
        self._max_workers = max(1, max_workers)
        self._extract_prompt = load_prompt("reader_extract.txt")
        self._select_prompt = load_prompt("reader_select.txt")

    def extract_relevant(self, clean: CleanText, intent: SearchIntent, title: str = "") -> str:
        """Ask the reader model for page content relevant to the search intent."""
        messages = [
            system(self._extract_prompt),
            user(
                f"Search intent: {intent.intent}\n"
                f"Page URL: {clean.source_url}\n"
                f"Page title: {title}\n\n"
                f"Page text:\n{clean.text}"
            ),
        ]
        result = self._gateway.chat(Role.READER, messages)
        if not result.ok:
            raise ExtractionFailed(result.text)
        reply = result.text.strip()
        if reply == NO_CONTENT_SENTINEL:
            return ""
        return reply

    def read_pages(self, hits: Sequence[SearchHit], intent: SearchIntent) -> list[EnrichedHit]:
        if not hits:
            return []
        selected = set(range(len(hits)))
        selection_note: str | None = None
        if self.cfg.mode is ReadMode.SELECTIVE:
            chosen = self._select(hits)
            if chosen is None:
                selection_note = "selector reply unparseable; falling back to full reading"
            else:
                selected = chosen

        pages = self._fetch_selected(hits, selected)

        enriched: list[EnrichedHit] = []
        for index, hit in enumerate(hits):
            if index not in selected:
                record = EnrichedHit(hit, "", FetchStatus.OK)
                self._record_page(hit, record, selected=False, truncated=None)
                enriched.append(record)
                continue
            html = pages.get(index)
            if html is None:
                record = EnrichedHit(hit, "", FetchStatus.FETCH_FAILED)
                self._record_page(hit, record, selected=True, truncated=None, note=selection_note)
                selection_note = None
                enriched.append(record)
                continue
            text, truncated = truncate_text(clean_html(html), self.cfg.max_chars)
            clean = CleanText(text, hit.url, truncated)
            try:
                content = self.extract_relevant(clean, intent, title=hit.title)
                record = EnrichedHit(hit, content, FetchStatus.OK)
            except ExtractionFailed as exc:
                logger.warning("extraction failed for %s: %s", hit.url, exc)
                record = EnrichedHit(hit, "", FetchStatus.EXTRACT_FAILED)
            self._record_page(hit, record, selected=True, truncated=truncated, note=selection_note)
            selection_note = None
            enriched.append(record)
        return enriched

    def _select(self, hits: Sequence[SearchHit]) -> set[int] | None:
        listing = "\n".join(
            f"{i}. {h.url}\n   title: {h.title}\n   summary: {h.summary}"
            for i, h in enumerate(hits, start=1)
        )
        messages = [
            system(self._select_prompt),
            user(f"Pick at most {self.cfg.max_selected} pages worth reading:\n\n{listing}"),
        ]
        result = self._gateway.chat(Role.READER, messages)
        if not result.ok:
            return None
        indices: list[int] = []
        for token in re.findall(r"\d+", result.text):
            value = int(token)
            if 1 <= value <= len(hits) and (value - 1) not in indices:
                indices.append(value - 1)
        if not indices:
            return None
        return set(indices[: self.cfg.max_selected])

    def _fetch_selected(self, hits: Sequence[SearchHit], selected: set[int]) -> dict[int, str]:
        """Fetch chosen pages, fanning out; result is keyed by hit index."""

        def fetch_one(index: int) -> tuple[int, str | None]:
            try:
                return index, self._fetch(hits[index].url)
            except FetchError as exc:
                logger.info("fetch failed for %s: %s", hits[index].url, exc)
                return index, None

        indices = sorted(selected)
        if len(indices) <= 1:
            results = [fetch_one(i) for i in indices]
        else:
            with ThreadPoolExecutor(max_workers=min(self._max_workers, len(indices))) as pool:
                results = list(pool.map(fetch_one, indices))
        return {index: html for index, html in results if html is not None}

    def _record_page(
        self,
        hit: SearchHit,
        record: EnrichedHit,
        selected: bool,
        truncated: bool | None,
        note: str | None = None,
    ) -> None:
        if self._trace is None:
            return
        payload = {
            "url": hit.url,
            "fetch_status": record.fetch_status.value,
            "selected": selected,
            "truncated": truncated,
            "relevant_content": record.relevant_content,
        }
        if not selected:
            payload["not_selected"] = True
        if note:
            payload["note"] = note
        self._trace.record(EventKind.PAGE_READ, payload)
