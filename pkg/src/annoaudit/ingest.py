"""Parse raw annotation documents and select auditable highlighted-text records.

Input is the Hypothes.is API document shape: a JSON object with an
"updated" timestamp, a "target" list whose entries carry a "source" URI and
a "selector" list, and optional "text" / "tags" fields. An annotation is
auditable when some target has a TextQuoteSelector with a non-empty "exact"
quote; the first such target wins.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Any, Iterable, Iterator, Mapping, Union

__all__ = [
    "AnnotationRecord",
    "CorpusLoad",
    "ParseError",
    "ParseIssue",
    "SkipReason",
    "Skipped",
    "TypeCensus",
    "census",
    "filter_highlighted",
    "load_corpus",
    "parse_annotation",
]


class ParseError(Exception):
    """Raised for documents that are not parseable at all."""

    def __init__(self, message: str, byte_offset: int = 0):
        super().__init__(f"{message} (byte offset {byte_offset})")
        self.byte_offset = byte_offset


class SkipReason(str, Enum):
    NO_HIGHLIGHT = "no_highlight"
    BAD_TIMESTAMP = "bad_timestamp"


@dataclass(frozen=True)
class Skipped:
    """A parseable annotation that cannot enter the audit pipeline.

    Keeps the (highlight, note, tags) presence flags so the type census
    still counts the document.
    """

    reason: SkipReason
    annotation_id: str = ""
    has_highlight: bool = False
    has_note: bool = False
    has_tags: bool = False


@dataclass(frozen=True)
class AnnotationRecord:
    """One auditable highlighted-text annotation."""

    id: str
    target_uri: str
    exact: str
    created_at: datetime  # timezone-aware UTC, sub-second precision preserved
    prefix: str | None = None
    suffix: str | None = None
    body_text: str | None = None
    tags: tuple[str, ...] = ()
    has_highlight: bool = True
    has_note: bool = False
    has_tags: bool = False


ParsedItem = Union[AnnotationRecord, Skipped]


def _parse_instant(value: Any) -> datetime | None:
    if not isinstance(value, str) or not value:
        return None
    text = value.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    try:
        parsed = datetime.fromisoformat(text)
    except ValueError:
        return None
    if parsed.tzinfo is None:
        parsed = parsed.replace(tzinfo=timezone.utc)
    return parsed.astimezone(timezone.utc)


def _first_quote_target(document: Mapping[str, Any]) -> tuple[str, Mapping[str, Any]] | None:
    """First target carrying a TextQuoteSelector with a non-empty quote."""
    targets = document.get("target")
    if not isinstance(targets, list):
        return None
    for target in targets:
        if not isinstance(target, Mapping):
            continue
        source = target.get("source")
        if not isinstance(source, str) or not source:
            continue
        selectors = target.get("selector")
        if not isinstance(selectors, list):
            continue
        for selector in selectors:
            if (
                isinstance(selector, Mapping)
                and selector.get("type") == "TextQuoteSelector"
                and isinstance(selector.get("exact"), str)
                and selector["exact"]
            ):
                return source, selector
    return None


def parse_annotation(document: Union[str, bytes, Mapping[str, Any]]) -> ParsedItem:
    """Parse one raw annotation document.

    Returns an AnnotationRecord for highlighted-text annotations with a
    usable creation timestamp, otherwise a Skipped carrying the reason and
    the census presence flags. A document that is not valid JSON at all
    raises ParseError with the byte offset of the failure.
    """
    if isinstance(document, (str, bytes)):
        raw = document
        try:
            decoded = json.loads(raw)
        except json.JSONDecodeError as exc:
            if isinstance(raw, bytes):
                offset = len(raw.decode("utf-8", errors="replace")[: exc.pos].encode("utf-8"))
            else:
                offset = len(raw[: exc.pos].encode("utf-8"))
            raise ParseError(exc.msg, byte_offset=offset) from exc
        if not isinstance(decoded, Mapping):
            raise ParseError("document is not a JSON object")
        document = decoded
    elif not isinstance(document, Mapping):
        raise ParseError("document is not a JSON object")

    annotation_id = str(document.get("id") or "")
    body_text = document.get("text")
    has_note = isinstance(body_text, str) and bool(body_text)
    raw_tags = document.get("tags")
    tags = tuple(str(t) for t in raw_tags) if isinstance(raw_tags, list) else ()
    has_tags = bool(tags)

    found = _first_quote_target(document)
    if found is None:
        return Skipped(
            reason=SkipReason.NO_HIGHLIGHT,
            annotation_id=annotation_id,
            has_highlight=False,
            has_note=has_note,
            has_tags=has_tags,
        )
    source, selector = found

    # "updated" is the annotation creation date; "created" is the fallback.
    created_at = _parse_instant(document.get("updated")) or _parse_instant(
        document.get("created")
    )
    if created_at is None:
        return Skipped(
            reason=SkipReason.BAD_TIMESTAMP,
            annotation_id=annotation_id,
            has_highlight=True,
            has_note=has_note,
            has_tags=has_tags,
        )

    prefix = selector.get("prefix")
    suffix = selector.get("suffix")
    return AnnotationRecord(
        id=annotation_id,
        target_uri=source,
        exact=selector["exact"],
        created_at=created_at,
        prefix=prefix if isinstance(prefix, str) else None,
        suffix=suffix if isinstance(suffix, str) else None,
        body_text=body_text if isinstance(body_text, str) else None,
        tags=tags,
        has_highlight=True,
        has_note=has_note,
        has_tags=has_tags,
    )


@dataclass(frozen=True)
class TypeCensus:
    """Counts of annotations keyed by their (highlight, note, tags) combination."""

    counts: Mapping[tuple[bool, bool, bool], int]
    total: int

    @property
    def highlighted_total(self) -> int:
        return sum(n for combo, n in self.counts.items() if combo[0])

    def rows(self) -> list[dict[str, Any]]:
        """Rows sorted by descending count, then by combination."""
        ordered = sorted(self.counts.items(), key=lambda kv: (-kv[1], kv[0]))
        return [
            {"highlight": h, "note": n, "tags": t, "count": count}
            for (h, n, t), count in ordered
            if count
        ]


def census(items: Iterable[ParsedItem]) -> TypeCensus:
    """Count each parsed item once by its presence combination."""
    counts: dict[tuple[bool, bool, bool], int] = {}
    total = 0
    for item in items:
        combo = (item.has_highlight, item.has_note, item.has_tags)
        counts[combo] = counts.get(combo, 0) + 1
        total += 1
    return TypeCensus(counts=counts, total=total)


def filter_highlighted(items: Iterable[ParsedItem]) -> list[AnnotationRecord]:
    """Auditable records (highlighted-text annotations), input order preserved."""
    return [
        item
        for item in items
        if isinstance(item, AnnotationRecord) and item.has_highlight
    ]


@dataclass(frozen=True)
class ParseIssue:
    line_number: int
    byte_offset: int
    message: str


@dataclass
class CorpusLoad:
    """Result of reading a newline-delimited annotation corpus."""

    items: list[ParsedItem] = field(default_factory=list)
    errors: list[ParseIssue] = field(default_factory=list)

    @property
    def records(self) -> list[AnnotationRecord]:
        return filter_highlighted(self.items)


def _iter_lines_with_offsets(text: str) -> Iterator[tuple[int, int, str]]:
    offset = 0
    for number, line in enumerate(text.split("\n"), start=1):
        yield number, offset, line
        offset += len(line.encode("utf-8")) + 1


def load_corpus(text: str) -> CorpusLoad:
    """Parse a newline-delimited corpus; malformed lines are collected, not fatal."""
    load = CorpusLoad()
    for number, offset, line in _iter_lines_with_offsets(text):
        if not line.strip():
            continue
        try:
            load.items.append(parse_annotation(line))
        except ParseError as exc:
            load.errors.append(
                ParseIssue(
                    line_number=number,
                    byte_offset=offset + exc.byte_offset,
                    message=str(exc),
                )
            )
    return load
