"""HTML cleanup, truncation boundaries, and the page-reading pipeline."""

from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from deepsearch.core import FetchStatus, Role, SearchHit, SearchIntent
from deepsearch.llm import ScriptEntry
from deepsearch.reader import (
    CleanText,
    ExtractionFailed,
    NO_CONTENT_SENTINEL,
    PageReader,
    ReadMode,
    ReaderConfig,
    clean_html,
    truncate_text,
)
from deepsearch.trace import EventKind, TraceRecorder
from deepsearch.web import FetchError

from conftest import make_corpus, make_gateway, scripted

INTENT = SearchIntent(("some query",), "find the facts")


def _reader(
    corpus_pages,
    reader_backend,
    mode=ReadMode.FULL,
    max_selected=3,
    trace=None,
    max_chars=65_536,
):
    corpus = make_corpus(corpus_pages)

    def fetch(url: str) -> str:
        page = corpus.pages.get(url)
        if page is None:
            raise FetchError("absent")
        return page.body_html

    gateway = make_gateway(reader=reader_backend, trace=trace)
    cfg = ReaderConfig(max_chars=max_chars, mode=mode, max_selected=max_selected)
    return PageReader(fetch, gateway, cfg, trace=trace)


class TestCleanHtml:
    def test_entities_decoded_and_tags_stripped(self):
        assert clean_html("<p>Hello&nbsp;world</p>") == "Hello world"

    def test_script_content_dropped(self):
        assert clean_html("<script>var x=1</script><p>A</p>") == "A"

    def test_empty_input(self):
        assert clean_html("") == ""

    def test_boilerplate_elements_dropped(self):
        html = "<nav>menu</nav><header>hd</header><footer>ft</footer><noscript>ns</noscript><p>body</p>"
        assert clean_html(html) == "body"

    def test_block_boundaries_become_newlines(self):
        assert clean_html("<p>a</p><p>b</p><div>c</div>") == "a\nb\nc"

    def test_garbage_never_fails(self):
        assert isinstance(clean_html("<<<><p junk='>'>><b>x"), str)

    @given(st.text(max_size=400))
    def test_idempotent_on_arbitrary_text(self, text: str):
        once = clean_html(text)
        assert clean_html(once) == once

    @given(st.text(max_size=400))
    def test_postconditions_on_arbitrary_text(self, text: str):
        out = clean_html(text)
        assert "<script" not in out
        assert "</" not in out
        assert all(ord(ch) > 0x08 for ch in out)


class TestTruncateText:
    def test_under_limit_unchanged(self):
        assert truncate_text("x" * 100, 65_536) == ("x" * 100, False)

    def test_over_limit_cuts_at_whitespace(self):
        text = "a " * 32_768 + "a"  # 65,537 chars
        cut, truncated = truncate_text(text, 65_536)
        assert truncated is True
        assert len(cut) <= 65_536
        assert not cut.endswith(" ")

    def test_multibyte_not_split(self):
        cut, truncated = truncate_text("αβγ" * 30_000, 10)
        assert truncated is True
        assert len(cut) <= 10
        assert cut == "αβγ" * 3 + "α"

    def test_exact_limit_not_truncated(self):
        assert truncate_text("abcdefghij", 10) == ("abcdefghij", False)

    def test_one_over_limit_hard_cut_without_whitespace(self):
        assert truncate_text("abcdefghijk", 10) == ("abcdefghij", True)

    def test_rejects_nonpositive_limit(self):
        with pytest.raises(ValueError):
            truncate_text("x", 0)

    @given(st.text(max_size=300), st.integers(min_value=1, max_value=120))
    def test_length_and_flag_invariants(self, text: str, limit: int):
        cut, truncated = truncate_text(text, limit)
        assert len(cut) <= limit
        assert truncated == (len(text) > limit)
        if not truncated:
            assert cut == text


class TestReaderConfig:
    def test_floor_on_max_chars(self):
        with pytest.raises(ValueError):
            ReaderConfig(max_chars=512)


class TestExtractRelevant:
    def test_scripted_reply_passes_through(self):
        reader = _reader([], scripted("FACT: born 1947"))
        clean = CleanText("some page text", "https://a.org", False)
        assert reader.extract_relevant(clean, INTENT) == "FACT: born 1947"

    def test_sentinel_maps_to_empty(self):
        reader = _reader([], scripted(NO_CONTENT_SENTINEL))
        clean = CleanText("irrelevant", "https://a.org", False)
        assert reader.extract_relevant(clean, INTENT) == ""

    def test_backend_error_raises_extraction_failed(self):
        reader = _reader([], scripted())  # exhausted script -> error result
        clean = CleanText("text", "https://a.org", False)
        with pytest.raises(ExtractionFailed):
            reader.extract_relevant(clean, INTENT)


PAGES = [
    ("https://p1.org", "t1", "<p>one</p>"),
    ("https://p2.org", "t2", "<p>two</p>"),
    ("https://p3.org", "t3", "<p>three</p>"),
    ("https://p4.org", "t4", "<p>four</p>"),
    ("https://p5.org", "t5", "<p>five</p>"),
]
HITS = [SearchHit(url, title) for url, title, _ in PAGES]


class TestReadPagesFull:
    def test_all_hits_enriched_in_order(self):
        reader = _reader(PAGES, scripted(*[f"fact {i}" for i in range(5)]))
        enriched = reader.read_pages(HITS, INTENT)
        assert [e.hit.url for e in enriched] == [h.url for h in HITS]
        assert all(e.fetch_status is FetchStatus.OK for e in enriched)
        assert [e.relevant_content for e in enriched] == [f"fact {i}" for i in range(5)]

    def test_missing_page_keeps_record_with_status(self):
        pages = PAGES[:4]  # p5 missing from corpus
        reader = _reader(pages, scripted(*[f"fact {i}" for i in range(4)]))
        enriched = reader.read_pages(HITS, INTENT)
        assert len(enriched) == 5
        by_url = {e.hit.url: e for e in enriched}
        assert by_url["https://p5.org"].fetch_status is FetchStatus.FETCH_FAILED
        assert by_url["https://p5.org"].relevant_content == ""
        assert sum(e.fetch_status is FetchStatus.OK for e in enriched) == 4

    def test_extract_error_marks_hit_and_continues(self):
        # Script has 2 replies for 3 pages: third extraction errors out.
        reader = _reader(PAGES[:3], scripted("a", "b"))
        enriched = reader.read_pages(HITS[:3], INTENT)
        assert [e.fetch_status for e in enriched] == [
            FetchStatus.OK,
            FetchStatus.OK,
            FetchStatus.EXTRACT_FAILED,
        ]

    def test_empty_hits(self):
        reader = _reader(PAGES, scripted())
        assert reader.read_pages([], INTENT) == []

    def test_truncation_applied_before_extraction(self):
        trace = TraceRecorder()
        long_body = "<p>" + "word " * 2000 + "</p>"  # ~10k chars
        reader = _reader(
            [("https://p1.org", "t", long_body)],
            scripted("ok"),
            trace=trace,
            max_chars=1024,
        )
        reader.read_pages([SearchHit("https://p1.org", "t")], INTENT)
        page_events = [e for e in trace.events if e.kind is EventKind.PAGE_READ]
        assert page_events[0].payload["truncated"] is True
        # The extraction prompt must carry at most max_chars of page text.
        call = [e for e in trace.events if e.kind is EventKind.BACKEND_CALL][0]
        page_text = call.payload["messages"][-1]["content"].split("Page text:\n", 1)[1]
        assert len(page_text) <= 1024


class TestReadPagesSelective:
    def test_selector_chooses_subset(self):
        trace = TraceRecorder()
        backend = scripted("1,3", "fact one", "fact three")
        reader = _reader(PAGES, backend, mode=ReadMode.SELECTIVE, trace=trace)
        enriched = reader.read_pages(HITS, INTENT)
        assert len(enriched) == 5
        assert enriched[0].relevant_content == "fact one"
        assert enriched[2].relevant_content == "fact three"
        for index in (1, 3, 4):
            assert enriched[index].fetch_status is FetchStatus.OK
            assert enriched[index].relevant_content == ""
        flagged = [
            e.payload["url"]
            for e in trace.events
            if e.kind is EventKind.PAGE_READ and e.payload.get("not_selected")
        ]
        assert flagged == ["https://p2.org", "https://p4.org", "https://p5.org"]

    def test_fetch_attempts_bounded_by_max_selected(self):
        calls: list[str] = []
        corpus = make_corpus(PAGES)

        def counting_fetch(url: str) -> str:
            calls.append(url)
            return corpus.pages[url].body_html

        gateway = make_gateway(reader=scripted("1,2,3,4,5", "a", "b", "c"))
        cfg = ReaderConfig(mode=ReadMode.SELECTIVE, max_selected=3)
        reader = PageReader(counting_fetch, gateway, cfg)
        reader.read_pages(HITS, INTENT)
        assert len(calls) == 3

    def test_full_mode_fetch_attempts_equal_hits(self):
        calls: list[str] = []
        corpus = make_corpus(PAGES)

        def counting_fetch(url: str) -> str:
            calls.append(url)
            return corpus.pages[url].body_html

        gateway = make_gateway(reader=scripted(*["x"] * 5))
        reader = PageReader(counting_fetch, gateway, ReaderConfig())
        reader.read_pages(HITS, INTENT)
        assert sorted(calls) == sorted(h.url for h in HITS)

    def test_unparseable_selector_falls_back_to_full(self):
        backend = scripted("no numbers here", *[f"fact {i}" for i in range(5)])
        reader = _reader(PAGES, backend, mode=ReadMode.SELECTIVE)
        enriched = reader.read_pages(HITS, INTENT)
        assert all(e.relevant_content.startswith("fact") for e in enriched)

    def test_out_of_range_indices_ignored(self):
        backend = scripted("2, 9, 700", "only fact")
        reader = _reader(PAGES, backend, mode=ReadMode.SELECTIVE)
        enriched = reader.read_pages(HITS, INTENT)
        assert enriched[1].relevant_content == "only fact"
        assert sum(bool(e.relevant_content) for e in enriched) == 1
