"""Turn fetched representations into normalized text and check quote attachment.

The attachment predicate is deliberately strict: a highlighted quote is
"attached" to a representation iff its normalized form occurs verbatim
(case-sensitively) in the normalized page text. No fuzzy matching.
"""

from __future__ import annotations

import shlex
import subprocess
import unicodedata
from dataclasses import dataclass, field
from email.message import Message
from html.parser import HTMLParser
from typing import Mapping

__all__ = [
    "AttachmentCheck",
    "ExtractionUnavailable",
    "NormalizedText",
    "Representation",
    "extract_text",
    "normalize",
    "quote_attached",
]


class ExtractionUnavailable(Exception):
    """No usable text extractor for the given media type."""

    def __init__(self, media_type: str, detail: str = "no extractor registered"):
        super().__init__(f"{media_type}: {detail}")
        self.media_type = media_type
        self.detail = detail


@dataclass(frozen=True)
class NormalizedText:
    """Markup-free text with all whitespace runs collapsed to single spaces."""

    text: str
    source_media_type: str = "text/plain"
    lossy: bool = False  # true when byte decoding needed replacement characters


@dataclass(frozen=True)
class Representation:
    """Which representation an attachment check ran against."""

    kind: str  # "live" | "memento"
    uri_m: str | None = None

    @classmethod
    def live(cls) -> "Representation":
        return cls(kind="live")

    @classmethod
    def memento(cls, uri_m: str) -> "Representation":
        return cls(kind="memento", uri_m=uri_m)


@dataclass(frozen=True)
class AttachmentCheck:
    """Result of searching one representation's text for a highlighted quote."""

    attached: bool
    match_offset: int | None
    representation: Representation
    caveats: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.attached != (self.match_offset is not None):
            raise ValueError("match_offset must be present iff attached")


def normalize(text: str, media_type: str = "text/plain", lossy: bool = False) -> NormalizedText:
    """NFC-normalize and collapse every whitespace run to a single space.

    Idempotent; case is preserved.
    """
    composed = unicodedata.normalize("NFC", text)
    collapsed = " ".join(composed.split())
    return NormalizedText(text=collapsed, source_media_type=media_type, lossy=lossy)


# Tags whose boundaries separate words when rendered; inline tags (b, em,
# span, a, ...) do not break the text flow, mirroring how a DOM serializes.
_BLOCK_TAGS = frozenset(
    """address article aside blockquote body br caption dd div dl dt fieldset
    figcaption figure footer form h1 h2 h3 h4 h5 h6 head header hr html li main
    nav ol option p pre section select table tbody td textarea tfoot th thead
    title tr ul""".split()
)

_SKIP_CONTENT_TAGS = frozenset({"script", "style"})


class _HtmlTextExtractor(HTMLParser):
    """Collects rendered text, dropping script/style content entirely."""

    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self._parts: list[str] = []
        self._skip_depth = 0

    def handle_starttag(self, tag: str, attrs) -> None:
        if tag in _SKIP_CONTENT_TAGS:
            self._skip_depth += 1
        elif tag in _BLOCK_TAGS:
            self._parts.append("\n")

    def handle_endtag(self, tag: str) -> None:
        if tag in _SKIP_CONTENT_TAGS:
            if self._skip_depth > 0:
                self._skip_depth -= 1
        elif tag in _BLOCK_TAGS:
            self._parts.append("\n")

    def handle_data(self, data: str) -> None:
        if self._skip_depth == 0:
            self._parts.append(data)

    def text(self) -> str:
        return "".join(self._parts)


def _parse_media_type(media_type: str) -> tuple[str, str | None]:
    """Split a Content-Type value into (type/subtype, charset)."""
    msg = Message()
    msg["Content-Type"] = media_type or "application/octet-stream"
    charset = msg.get_param("charset")
    return msg.get_content_type(), charset if isinstance(charset, str) else None


def _decode(body: bytes, charset: str | None) -> tuple[str, bool]:
    """Decode bytes, falling back to replacement characters (flagged lossy)."""
    encoding = charset or "utf-8"
    try:
        return body.decode(encoding), False
    except (UnicodeDecodeError, LookupError):
        return body.decode("utf-8", errors="replace"), True


def _strip_html(markup: str) -> str:
    parser = _HtmlTextExtractor()
    parser.feed(markup)
    parser.close()
    return parser.text()


def extract_text(
    body: bytes,
    media_type: str,
    extractors: Mapping[str, str] | None = None,
) -> NormalizedText:
    """Extract normalized text from a fetched representation.

    HTML and plain text are handled natively. Any other media type is
    delegated to a registered external extractor command (bytes on stdin,
    UTF-8 text on stdout); with none registered, raises ExtractionUnavailable.
    """
    content_type, charset = _parse_media_type(media_type)

    if content_type in ("text/html", "application/xhtml+xml"):
        markup, lossy = _decode(body, charset)
        return normalize(_strip_html(markup), media_type=content_type, lossy=lossy)

    if content_type.startswith("text/"):
        text, lossy = _decode(body, charset)
        return normalize(text, media_type=content_type, lossy=lossy)

    command = (extractors or {}).get(content_type)
    if command is None:
        raise ExtractionUnavailable(content_type)
    try:
        proc = subprocess.run(
            shlex.split(command),
            input=body,
            capture_output=True,
            timeout=60,
        )
    except (OSError, subprocess.TimeoutExpired) as exc:
        raise ExtractionUnavailable(content_type, f"extractor failed: {exc}") from exc
    if proc.returncode != 0:
        raise ExtractionUnavailable(
            content_type, f"extractor exited with status {proc.returncode}"
        )
    text, lossy = _decode(proc.stdout, "utf-8")
    return normalize(text, media_type=content_type, lossy=lossy)


def quote_attached(
    page: NormalizedText,
    exact: str,
    representation: Representation | None = None,
) -> AttachmentCheck:
    """Check whether a highlighted quote occurs verbatim in the page text.

    The quote is normalized with the same rules as the page, so whitespace
    differences never flip the verdict; matching is case-sensitive.
    """
    if not exact:
        raise ValueError("quote must be non-empty")
    rep = representation or Representation.live()
    needle = normalize(exact).text
    offset = page.text.find(needle)
    caveats = ("lossy_decode",) if page.lossy else ()
    if offset < 0:
        return AttachmentCheck(
            attached=False, match_offset=None, representation=rep, caveats=caveats
        )
    return AttachmentCheck(
        attached=True, match_offset=offset, representation=rep, caveats=caveats
    )
