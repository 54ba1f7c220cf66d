"""Discover archived snapshots (mementos) and pick the ones nearest a date.

TimeMaps arrive as application/link-format documents; every link whose rel
contains "memento" and that carries a parseable datetime attribute becomes
a MementoRef. Selection keeps *all* mementos tied at the closest datetime
on each side of the annotation date: archives flake, and per-archive
recovery statistics need the full tie set.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from datetime import datetime, timezone
from email.utils import parsedate_to_datetime
from urllib.parse import quote, urlsplit

from .fetchlib import Fetcher, follow

__all__ = [
    "ARCHIVE_LABELS",
    "MementoNeighborhood",
    "MementoRef",
    "TimeMap",
    "TimeMapParseError",
    "TimeMapUnavailable",
    "archive_host",
    "fetch_timemap",
    "nearest_pair",
    "parse_timemap",
]


class TimeMapParseError(Exception):
    """The document is not readable as link-format."""


class TimeMapUnavailable(Exception):
    """TimeMap discovery failed (network/aggregator error, not empty holdings)."""


# Canonical labels for archive authorities whose wayback hostname differs
# from the archive's common name; unknown authorities label as themselves.
ARCHIVE_LABELS = {
    "web.archive.org": "Internet Archive",
    "wayback.archive-it.org": "Archive-It",
}


def archive_host(uri_m: str) -> str:
    """Canonical archive label for a memento URI."""
    host = (urlsplit(uri_m).hostname or "").lower()
    return ARCHIVE_LABELS.get(host, host or uri_m)


@dataclass(frozen=True)
class MementoRef:
    uri_m: str
    memento_datetime: datetime  # timezone-aware UTC, second precision
    archive: str

    @classmethod
    def of(cls, uri_m: str, memento_datetime: datetime) -> "MementoRef":
        return cls(
            uri_m=uri_m,
            memento_datetime=memento_datetime.astimezone(timezone.utc).replace(microsecond=0),
            archive=archive_host(uri_m),
        )


@dataclass(frozen=True)
class TimeMap:
    """All known mementos of a URI-R, ascending by datetime (stable for ties)."""

    uri_r: str
    mementos: tuple[MementoRef, ...] = ()
    skipped_links: int = 0  # memento links with missing/bad datetime attributes
    continuations: tuple[str, ...] = ()


@dataclass(frozen=True)
class MementoNeighborhood:
    """The tied closest mementos at-or-before / strictly-after a datetime."""

    before: tuple[MementoRef, ...]
    after: tuple[MementoRef, ...]


def _split_top_level(body: str, sep: str) -> list[str]:
    """Split on a separator, ignoring separators inside quotes or <...>."""
    parts: list[str] = []
    buf: list[str] = []
    in_quote = False
    in_uri = False
    escaped = False
    for ch in body:
        if escaped:
            buf.append(ch)
            escaped = False
            continue
        if in_quote and ch == "\\":
            buf.append(ch)
            escaped = True
            continue
        if ch == '"':
            in_quote = not in_quote
        elif not in_quote and ch == "<":
            in_uri = True
        elif not in_quote and ch == ">":
            in_uri = False
        if ch == sep and not in_quote and not in_uri:
            parts.append("".join(buf))
            buf = []
        else:
            buf.append(ch)
    parts.append("".join(buf))
    return parts


def _parse_link_value(segment: str) -> tuple[str, dict[str, str]]:
    segment = segment.strip()
    if not segment.startswith("<"):
        raise TimeMapParseError(f"link value does not start with '<': {segment[:40]!r}")
    end = segment.find(">")
    if end < 0:
        raise TimeMapParseError("unterminated URI in link value")
    uri = segment[1:end]
    params: dict[str, str] = {}
    for raw in _split_top_level(segment[end + 1 :], ";"):
        raw = raw.strip()
        if not raw:
            continue
        name, eq, value = raw.partition("=")
        if not eq:
            raise TimeMapParseError(f"malformed link parameter: {raw!r}")
        value = value.strip()
        if value.startswith('"') and value.endswith('"') and len(value) >= 2:
            value = value[1:-1].replace('\\"', '"').replace("\\\\", "\\")
        params.setdefault(name.strip().lower(), value)
    return uri, params


def _parse_wire_datetime(value: str) -> datetime | None:
    try:
        parsed = parsedate_to_datetime(value)
    except (TypeError, ValueError, IndexError):
        return None
    if parsed.tzinfo is None:
        parsed = parsed.replace(tzinfo=timezone.utc)
    return parsed.astimezone(timezone.utc).replace(microsecond=0)


def parse_timemap(body: str, uri_r: str) -> TimeMap:
    """Parse a link-format TimeMap document.

    Links whose rel contains "memento" need a parseable datetime attribute;
    ones without are skipped and counted. rel="original"/"timegate"/"self"
    links are ignored (timemap links are kept as continuation candidates).
    """
    refs: list[MementoRef] = []
    skipped = 0
    continuations: list[str] = []
    if body.strip():
        for segment in _split_top_level(body, ","):
            if not segment.strip():
                continue
            uri, params = _parse_link_value(segment)
            rel_tokens = params.get("rel", "").split()
            if "memento" in rel_tokens:
                when = _parse_wire_datetime(params.get("datetime", ""))
                if when is None:
                    skipped += 1
                else:
                    refs.append(MementoRef.of(uri, when))
            elif "timemap" in rel_tokens and "self" not in rel_tokens:
                continuations.append(uri)
    refs.sort(key=lambda r: r.memento_datetime)  # stable: wire order for ties
    return TimeMap(
        uri_r=uri_r,
        mementos=tuple(refs),
        skipped_links=skipped,
        continuations=tuple(continuations),
    )


def fetch_timemap(
    uri_r: str,
    aggregator_base: str,
    fetcher: Fetcher,
    *,
    max_redirects: int = 10,
) -> TimeMap:
    """Request a TimeMap from an aggregator endpoint.

    A 404 or empty document means the archives hold nothing (empty
    TimeMap); network failures and unreadable responses raise
    TimeMapUnavailable so callers can keep "unknown" distinct from "none".
    One rel="timemap" continuation link is followed and merged.
    """
    url = aggregator_base + quote(uri_r, safe="")
    chain, result = follow(fetcher, "GET", url, max_redirects=max_redirects)
    if result.failed:
        raise TimeMapUnavailable(f"aggregator fetch failed: {result.error}")
    if result.status == 404:
        return TimeMap(uri_r=uri_r)
    if result.status != 200:
        raise TimeMapUnavailable(f"aggregator returned status {result.status}")

    body = (result.body or b"").decode("utf-8", errors="replace")
    if not body.strip():
        return TimeMap(uri_r=uri_r)
    try:
        timemap = parse_timemap(body, uri_r)
    except TimeMapParseError as exc:
        raise TimeMapUnavailable(f"unparseable timemap: {exc}") from exc

    for continuation in timemap.continuations:
        if continuation in chain or continuation == url:
            continue
        _, more = follow(fetcher, "GET", continuation, max_redirects=max_redirects)
        if more.status != 200 or more.body is None:
            break
        try:
            extra = parse_timemap(more.body.decode("utf-8", errors="replace"), uri_r)
        except TimeMapParseError:
            break
        seen = {(r.uri_m, r.memento_datetime) for r in timemap.mementos}
        merged = list(timemap.mementos) + [
            r for r in extra.mementos if (r.uri_m, r.memento_datetime) not in seen
        ]
        merged.sort(key=lambda r: r.memento_datetime)
        timemap = TimeMap(
            uri_r=uri_r,
            mementos=tuple(merged),
            skipped_links=timemap.skipped_links + extra.skipped_links,
        )
        break  # pagination is followed once only
    return timemap


def nearest_pair(timemap: TimeMap, t_anno: datetime) -> MementoNeighborhood:
    """Closest mementos at-or-before and strictly-after the annotation date.

    Each side contains every memento tied at the selected datetime.
    Comparison happens at second precision, matching the wire format.
    """
    t = t_anno.astimezone(timezone.utc).replace(microsecond=0)
    datetimes = [ref.memento_datetime for ref in timemap.mementos]
    split = bisect.bisect_right(datetimes, t)

    before: tuple[MementoRef, ...] = ()
    if split > 0:
        pivot = datetimes[split - 1]
        lo = bisect.bisect_left(datetimes, pivot)
        before = timemap.mementos[lo:split]

    after: tuple[MementoRef, ...] = ()
    if split < len(datetimes):
        pivot = datetimes[split]
        hi = bisect.bisect_right(datetimes, pivot)
        after = timemap.mementos[split:hi]

    return MementoNeighborhood(before=before, after=after)
