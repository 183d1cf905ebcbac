"""HTML-to-text utilities shared by the page reader and the mock search corpus."""

from __future__ import annotations

import logging
import re
from html.parser import HTMLParser

logger = logging.getLogger(__name__)

# Elements whose entire content is boilerplate, not page text.
_SKIP_ELEMENTS = frozenset({"script", "style", "nav", "header", "footer", "noscript"})

# Elements whose boundaries separate blocks of text.
_BLOCK_ELEMENTS = frozenset(
    {
        "address", "article", "aside", "blockquote", "br", "caption", "dd", "div",
        "dl", "dt", "fieldset", "figcaption", "figure", "form", "h1", "h2", "h3",
        "h4", "h5", "h6", "hr", "li", "main", "ol", "p", "pre", "section", "table",
        "tbody", "td", "th", "thead", "tr", "ul",
    }
)

_BLOCK_BREAK = object()


class _TextExtractor(HTMLParser):
    """Collects text chunks outside boilerplate elements, with block-break markers."""

    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.pieces: list[object] = []
        self._skip_depth = 0

    def handle_starttag(self, tag: str, attrs) -> None:
        if tag in _SKIP_ELEMENTS:
            self._skip_depth += 1
        elif tag in _BLOCK_ELEMENTS:
            self.pieces.append(_BLOCK_BREAK)

    def handle_startendtag(self, tag: str, attrs) -> None:
        if tag in _BLOCK_ELEMENTS:
            self.pieces.append(_BLOCK_BREAK)

    def handle_endtag(self, tag: str) -> None:
        if tag in _SKIP_ELEMENTS:
            if self._skip_depth > 0:
                self._skip_depth -= 1
        elif tag in _BLOCK_ELEMENTS:
            self.pieces.append(_BLOCK_BREAK)

    def handle_data(self, data: str) -> None:
        if self._skip_depth == 0 and data:
            self.pieces.append(data)


def _clean_pass(text: str) -> str:
    parser = _TextExtractor()
    try:
        parser.feed(text)
        parser.close()
    except Exception:  # parser is lenient, but garbage input must never fail
        logger.debug("HTML parse error; falling back to regex tag stripping", exc_info=True)
        parser = _TextExtractor()
        parser.pieces = [re.sub(r"<[^>]*>", " ", text)]

    chunks: list[str] = []
    for piece in parser.pieces:
        chunks.append("\n" if piece is _BLOCK_BREAK else str(piece))
    raw = "".join(chunks)

    # Drop control characters except newline/tab, and residual angle brackets
    # (stray markup punctuation counts as special characters here).
    raw = "".join(ch for ch in raw if ch in "\n\t" or (ord(ch) >= 0x20 and ch != "\x7f"))
    raw = raw.replace("<", "").replace(">", "")

    lines = []
    for line in raw.split("\n"):
        collapsed = re.sub(r"\s+", " ", line).strip()
        if collapsed:
            lines.append(collapsed)
    return "\n".join(lines)


def clean_html(raw_html: str) -> str:
    """Strip markup and boilerplate element content, decode entities, normalize whitespace.

    The single cleaning pass is iterated until it stops changing the text, so
    the function is idempotent even on double-escaped or nested-entity input.
    Each pass only removes or collapses characters, so the loop terminates.
    """
    text = raw_html
    for _ in range(16):
        cleaned = _clean_pass(text)
        if cleaned == text:
            return cleaned
        text = cleaned
    return text


def truncate_text(text: str, max_chars: int) -> tuple[str, bool]:
    """Cut at the last whitespace at or before max_chars (hard cut if none)."""
    if max_chars < 1:
        raise ValueError("max_chars must be >= 1")
    if len(text) <= max_chars:
        return text, False
    prefix = text[:max_chars]
    match = re.search(r"\s\S*$", prefix)
    if match is None:
        return prefix, True
    return prefix[: match.start()].rstrip(), True
