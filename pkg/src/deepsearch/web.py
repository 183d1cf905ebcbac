"""Search-provider clients and page fetchers, with an in-memory corpus for offline runs."""

from __future__ import annotations

import json
import logging
import os
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Protocol

import requests

from .core import SearchHit, is_absolute_url
from .htmltext import clean_html

logger = logging.getLogger(__name__)

DEFAULT_TOP_K = 5
DEFAULT_TIMEOUT_MS = 10_000
MAX_BODY_BYTES = 8 * 1024 * 1024
SUMMARY_CHARS = 200
USER_AGENT = "deepsearch/0.1 (+research pipeline; single-page fetches)"
MAX_REDIRECTS = 5
_FETCH_GRACE_S = 1.0


class Provider(str, Enum):
    LIVE = "live"
    MOCK = "mock"


@dataclass(frozen=True)
class SerpAdapter:
    """Field mapping from a JSON search API response onto search hits.

    Dotted paths address nested fields, so any SERP-style API plugs in via
    configuration instead of code.
    """

    endpoint: str
    method: str = "GET"
    query_param: str = "q"
    results_path: str = "organic"
    url_key: str = "link"
    title_key: str = "title"
    snippet_key: str = "snippet"
    extra_params: tuple[tuple[str, str], ...] = ()
    api_key_param: str | None = None
    api_key_header: str | None = None


@dataclass(frozen=True)
class SearchProviderConfig:
    provider: Provider = Provider.MOCK
    top_k: int = DEFAULT_TOP_K
    timeout_ms: int = DEFAULT_TIMEOUT_MS
    api_key_env: str = "SEARCH_API_KEY"
    corpus_path: str | None = None
    adapter: SerpAdapter | None = None

    def __post_init__(self) -> None:
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.timeout_ms < 1:
            raise ValueError("timeout_ms must be positive")


def tokenize(text: str) -> set[str]:
    return set(re.findall(r"\w+", text.lower()))


@dataclass(frozen=True)
class MockPage:
    url: str
    title: str
    body_html: str
    body_text: str = field(compare=False, default="")
    tokens: frozenset[str] = field(compare=False, default=frozenset())


class MockCorpus:
    """In-memory page store; search ranks by token overlap, fetch returns stored HTML."""

    def __init__(self, pages: Iterable[dict[str, str]] = ()) -> None:
        self.pages: dict[str, MockPage] = {}
        for page in pages:
            self.add(page["url"], page.get("title", ""), page.get("body_html", ""))

    def add(self, url: str, title: str, body_html: str) -> None:
        if url in self.pages:
            raise ValueError(f"duplicate corpus url: {url!r}")
        body_text = clean_html(body_html)
        self.pages[url] = MockPage(
            url=url,
            title=title,
            body_html=body_html,
            body_text=body_text,
            tokens=frozenset(tokenize(title) | tokenize(body_text)),
        )

    @classmethod
    def from_jsonl(cls, path: str | Path) -> "MockCorpus":
        corpus = cls()
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            record = json.loads(line)
            corpus.add(record["url"], record.get("title", ""), record.get("body_html", ""))
        return corpus

    def __len__(self) -> int:
        return len(self.pages)


class SearchClient(Protocol):
    last_error: str | None

    def search(self, query: str) -> list[SearchHit]: ...


class MockSearchClient:
    """Pure function of (corpus, query): overlap-ranked hits, ties broken by url."""

    def __init__(self, corpus: MockCorpus, top_k: int = DEFAULT_TOP_K) -> None:
        self.corpus = corpus
        self.top_k = top_k
        self.last_error: str | None = None

    def search(self, query: str) -> list[SearchHit]:
        self.last_error = None
        if not query.strip():
            raise ValueError("query must be non-empty")
        query_tokens = tokenize(query)
        scored: list[tuple[int, str, MockPage]] = []
        for url, page in self.corpus.pages.items():
            score = len(query_tokens & page.tokens)
            if score > 0:
                scored.append((score, url, page))
        scored.sort(key=lambda item: (-item[0], item[1]))
        return [
            SearchHit(url=page.url, title=page.title, summary=page.body_text[:SUMMARY_CHARS])
            for _, _, page in scored[: self.top_k]
        ]


def _dig(record: Any, dotted: str) -> Any:
    value = record
    for part in dotted.split("."):
        if not part:
            continue
        if isinstance(value, dict):
            value = value.get(part)
        else:
            return None
        if value is None:
            return None
    return value


class LiveSearchClient:
    """SERP API client; failures degrade to empty results so the agent loop can go on."""

    def __init__(
        self,
        adapter: SerpAdapter,
        top_k: int = DEFAULT_TOP_K,
        timeout_ms: int = DEFAULT_TIMEOUT_MS,
        api_key_env: str = "SEARCH_API_KEY",
        session: requests.Session | None = None,
    ) -> None:
        self.adapter = adapter
        self.top_k = top_k
        self.timeout_s = timeout_ms / 1000.0
        self.api_key_env = api_key_env
        self._session = session or requests.Session()
        self.last_error: str | None = None

    def search(self, query: str) -> list[SearchHit]:
        self.last_error = None
        if not query.strip():
            raise ValueError("query must be non-empty")
        adapter = self.adapter
        params = {adapter.query_param: query, **dict(adapter.extra_params)}
        headers = {"User-Agent": USER_AGENT}
        api_key = os.environ.get(self.api_key_env, "")
        if api_key and adapter.api_key_param:
            params[adapter.api_key_param] = api_key
        if api_key and adapter.api_key_header:
            headers[adapter.api_key_header] = api_key
        try:
            if adapter.method.upper() == "POST":
                response = self._session.post(
                    adapter.endpoint, json=params, headers=headers, timeout=self.timeout_s
                )
            else:
                response = self._session.get(
                    adapter.endpoint, params=params, headers=headers, timeout=self.timeout_s
                )
            response.raise_for_status()
            body = response.json()
        except (requests.RequestException, ValueError) as exc:
            self.last_error = f"search failed: {exc}"
            logger.warning("search failed for %r: %s", query, exc)
            return []
        return self._map_hits(body)

    def _map_hits(self, body: Any) -> list[SearchHit]:
        raw_results = _dig(body, self.adapter.results_path)
        if not isinstance(raw_results, list):
            self.last_error = f"search response missing results at {self.adapter.results_path!r}"
            return []
        hits: list[SearchHit] = []
        seen: set[str] = set()
        for record in raw_results:
            if not isinstance(record, dict):
                continue
            url = _dig(record, self.adapter.url_key)
            if not isinstance(url, str) or not is_absolute_url(url) or url in seen:
                continue
            seen.add(url)
            title = _dig(record, self.adapter.title_key)
            snippet = _dig(record, self.adapter.snippet_key)
            hits.append(
                SearchHit(
                    url=url,
                    title=title if isinstance(title, str) else "",
                    summary=snippet if isinstance(snippet, str) else "",
                )
            )
            if len(hits) >= self.top_k:
                break
        return hits


def make_search_client(cfg: SearchProviderConfig) -> SearchClient:
    if cfg.provider is Provider.MOCK:
        if cfg.corpus_path is None:
            raise ValueError("mock provider needs a corpus_path")
        return MockSearchClient(MockCorpus.from_jsonl(cfg.corpus_path), cfg.top_k)
    if cfg.adapter is None:
        raise ValueError("live provider needs an adapter mapping")
    return LiveSearchClient(cfg.adapter, cfg.top_k, cfg.timeout_ms, cfg.api_key_env)


class FetchError(Exception):
    """Page fetch failed: timeout, bad status, wrong content type, or oversized body."""


class MockFetcher:
    def __init__(self, corpus: MockCorpus) -> None:
        self.corpus = corpus

    def __call__(self, url: str) -> str:
        page = self.corpus.pages.get(url)
        if page is None:
            raise FetchError(f"url not in corpus: {url}")
        return page.body_html


def fetch_page(
    url: str,
    timeout_ms: int = DEFAULT_TIMEOUT_MS,
    max_body_bytes: int = MAX_BODY_BYTES,
    session: requests.Session | None = None,
) -> str:
    """Fetch one page and decode it to text; any failure raises FetchError."""
    if not is_absolute_url(url):
        raise FetchError(f"not an absolute url: {url!r}")
    sess = session or requests.Session()
    sess.max_redirects = MAX_REDIRECTS
    timeout_s = timeout_ms / 1000.0 + _FETCH_GRACE_S
    try:
        response = sess.get(
            url,
            timeout=timeout_s,
            stream=True,
            headers={"User-Agent": USER_AGENT},
            allow_redirects=True,
        )
    except requests.RequestException as exc:
        raise FetchError(f"fetch failed: {exc}") from exc
    with response:
        if response.status_code != 200:
            raise FetchError(f"HTTP {response.status_code}")
        content_type = response.headers.get("Content-Type", "")
        if content_type and "html" not in content_type.lower():
            raise FetchError(f"non-HTML content type: {content_type}")
        chunks: list[bytes] = []
        size = 0
        for chunk in response.iter_content(chunk_size=65536):
            size += len(chunk)
            if size > max_body_bytes:
                raise FetchError(f"body too large: over {max_body_bytes} bytes")
            chunks.append(chunk)
        body = b"".join(chunks)
        encoding = response.encoding or response.apparent_encoding or "utf-8"
    try:
        return body.decode(encoding, errors="replace")
    except LookupError:
        return body.decode("utf-8", errors="replace")


class LiveFetcher:
    """Fetcher bound to a timeout and byte cap, reusing one HTTP session."""

    def __init__(
        self,
        timeout_ms: int = DEFAULT_TIMEOUT_MS,
        max_body_bytes: int = MAX_BODY_BYTES,
    ) -> None:
        self.timeout_ms = timeout_ms
        self.max_body_bytes = max_body_bytes
        self._session = requests.Session()

    def __call__(self, url: str) -> str:
        return fetch_page(url, self.timeout_ms, self.max_body_bytes, self._session)
