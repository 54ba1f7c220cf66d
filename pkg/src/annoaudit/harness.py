"""Deterministic local test environment: live sites, archives, aggregator.

One loopback HTTP server virtual-hosts every fixture hostname (dispatch on
the Host header): annotation target sites with configurable misbehaviors, a
wayback-style endpoint per archive hostname, and a Memento aggregator
serving link-format TimeMaps plus a TimeGate. Point the audit engine at it
with host overrides; every response is a pure function of (manifest,
request).

The oracle computes expected verdict categories straight from the manifest
with naive substring scans and its own linear snapshot search; it shares no
selection or normalization code with the pipeline.
"""

from __future__ import annotations

import html
import json
import random
import re
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from email.utils import format_datetime, parsedate_to_datetime
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import unquote, urlsplit

__all__ = [
    "ArchiveHolding",
    "FixtureAnnotation",
    "FixtureManifest",
    "FixturePage",
    "FixtureServer",
    "MANIFEST_VERSION",
    "PageVersion",
    "generate_manifest",
    "oracle_verdicts",
    "write_timemap",
]

MANIFEST_VERSION = 1

_UTC = timezone.utc


def _second(dt: datetime) -> datetime:
    return dt.astimezone(_UTC).replace(microsecond=0)


@dataclass
class PageVersion:
    at: datetime  # second precision (wire format resolution)
    body: str
    media_type: str = "text/html"

    def __post_init__(self) -> None:
        self.at = _second(self.at)


@dataclass
class FixturePage:
    uri: str
    versions: list[PageVersion]
    live_index: int | None = None  # None serves the latest version
    behavior: str | None = None  # "real_404" | "soft_404" | "timeout" | "status:N"

    @property
    def live_body(self) -> PageVersion:
        index = self.live_index if self.live_index is not None else len(self.versions) - 1
        return self.versions[index]

    def version_at(self, at: datetime) -> PageVersion | None:
        for version in self.versions:
            if version.at == at:
                return version
        return None


@dataclass
class ArchiveHolding:
    archive_hostname: str  # e.g. "web.archive.org"
    page_uri: str
    datetimes: list[datetime]

    def __post_init__(self) -> None:
        self.datetimes = [_second(dt) for dt in self.datetimes]

    def memento_uri(self, at: datetime) -> str:
        return f"http://{self.archive_hostname}/web/{at:%Y%m%d%H%M%S}/{self.page_uri}"


@dataclass
class FixtureAnnotation:
    id: str
    target_uri: str
    exact: str
    created_at: datetime
    note: str = ""
    tags: list[str] = field(default_factory=list)

    def to_document(self) -> dict:
        """Annotation in the Hypothes.is API document shape."""
        return {
            "id": self.id,
            "updated": self.created_at.astimezone(_UTC).isoformat(),
            "created": self.created_at.astimezone(_UTC).isoformat(),
            "text": self.note,
            "tags": list(self.tags),
            "uri": self.target_uri,
            "target": [
                {
                    "source": self.target_uri,
                    "selector": [
                        {"type": "TextPositionSelector", "start": 0, "end": len(self.exact)},
                        {
                            "type": "TextQuoteSelector",
                            "exact": self.exact,
                            "prefix": "",
                            "suffix": "",
                        },
                    ],
                }
            ],
        }


@dataclass
class FixtureManifest:
    pages: list[FixturePage] = field(default_factory=list)
    holdings: list[ArchiveHolding] = field(default_factory=list)
    annotations: list[FixtureAnnotation] = field(default_factory=list)
    aggregator_hostname: str = "aggregator.fixture.test"
    expected_verdicts: dict[str, str] = field(default_factory=dict)

    def validate(self) -> None:
        pages = {p.uri: p for p in self.pages}
        for holding in self.holdings:
            page = pages.get(holding.page_uri)
            if page is None:
                raise ValueError(f"holding references unknown page {holding.page_uri}")
            for dt in holding.datetimes:
                if page.version_at(dt) is None:
                    raise ValueError(
                        f"snapshot {dt.isoformat()} of {holding.page_uri} "
                        "matches no page version"
                    )

    def site_hostnames(self) -> set[str]:
        return {
            (urlsplit(p.uri).hostname or "").lower() for p in self.pages
        } - {""}

    def archive_hostnames(self) -> set[str]:
        return {h.archive_hostname.lower() for h in self.holdings}

    def hostnames(self) -> set[str]:
        return self.site_hostnames() | self.archive_hostnames() | {self.aggregator_hostname}

    def corpus_ndjson(self) -> str:
        return "".join(json.dumps(a.to_document()) + "\n" for a in self.annotations)

    def snapshots_of(self, uri: str) -> list[tuple[datetime, ArchiveHolding]]:
        found = [
            (dt, holding)
            for holding in self.holdings
            if holding.page_uri == uri
            for dt in holding.datetimes
        ]
        found.sort(key=lambda pair: pair[0])
        return found

    def to_json(self) -> str:
        return json.dumps(
            {
                "manifest_version": MANIFEST_VERSION,
                "aggregator_hostname": self.aggregator_hostname,
                "pages": [
                    {
                        "uri": p.uri,
                        "live_index": p.live_index,
                        "behavior": p.behavior,
                        "versions": [
                            {
                                "at": v.at.isoformat(),
                                "body": v.body,
                                "media_type": v.media_type,
                            }
                            for v in p.versions
                        ],
                    }
                    for p in self.pages
                ],
                "holdings": [
                    {
                        "archive_hostname": h.archive_hostname,
                        "page_uri": h.page_uri,
                        "datetimes": [dt.isoformat() for dt in h.datetimes],
                    }
                    for h in self.holdings
                ],
                "annotations": [
                    {
                        "id": a.id,
                        "target_uri": a.target_uri,
                        "exact": a.exact,
                        "created_at": a.created_at.isoformat(),
                        "note": a.note,
                        "tags": a.tags,
                    }
                    for a in self.annotations
                ],
                "expected_verdicts": self.expected_verdicts,
            },
            indent=2,
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "FixtureManifest":
        data = json.loads(text)
        if data.get("manifest_version") != MANIFEST_VERSION:
            raise ValueError(f"unsupported manifest version {data.get('manifest_version')!r}")
        manifest = cls(
            pages=[
                FixturePage(
                    uri=p["uri"],
                    live_index=p.get("live_index"),
                    behavior=p.get("behavior"),
                    versions=[
                        PageVersion(
                            at=datetime.fromisoformat(v["at"]),
                            body=v["body"],
                            media_type=v.get("media_type", "text/html"),
                        )
                        for v in p["versions"]
                    ],
                )
                for p in data["pages"]
            ],
            holdings=[
                ArchiveHolding(
                    archive_hostname=h["archive_hostname"],
                    page_uri=h["page_uri"],
                    datetimes=[datetime.fromisoformat(dt) for dt in h["datetimes"]],
                )
                for h in data["holdings"]
            ],
            annotations=[
                FixtureAnnotation(
                    id=a["id"],
                    target_uri=a["target_uri"],
                    exact=a["exact"],
                    created_at=datetime.fromisoformat(a["created_at"]),
                    note=a.get("note", ""),
                    tags=list(a.get("tags", [])),
                )
                for a in data["annotations"]
            ],
            aggregator_hostname=data.get("aggregator_hostname", "aggregator.fixture.test"),
            expected_verdicts=dict(data.get("expected_verdicts", {})),
        )
        manifest.validate()
        return manifest


def write_timemap(uri_r: str, mementos: list[tuple[str, datetime]]) -> str:
    """Serialize a TimeMap as application/link-format (ascending datetimes)."""
    lines = [f'<{uri_r}>; rel="original"']
    for uri_m, at in mementos:
        stamp = format_datetime(_second(at), usegmt=True)
        lines.append(f'<{uri_m}>; rel="memento"; datetime="{stamp}"')
    return ",\n".join(lines) + "\n"


class FixtureServer:
    """Serves a manifest on a loopback port with Host-header virtual hosting."""

    def __init__(self, manifest: FixtureManifest, *, timeout_sleep: float = 2.0):
        manifest.validate()
        self.manifest = manifest
        self.timeout_sleep = timeout_sleep
        self._server: ThreadingHTTPServer | None = None
        self._thread: threading.Thread | None = None

    # -- lifecycle

    def start(self) -> "FixtureServer":
        handler = _make_handler(self.manifest, self.timeout_sleep)
        self._server = ThreadingHTTPServer(("127.0.0.1", 0), handler)
        self._server.daemon_threads = True
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
            self._server = None

    def __enter__(self) -> "FixtureServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    @property
    def port(self) -> int:
        assert self._server is not None, "server not started"
        return self._server.server_address[1]

    def host_overrides(self) -> dict[str, str]:
        address = f"127.0.0.1:{self.port}"
        return {host: address for host in self.manifest.hostnames()}

    @property
    def aggregator_base(self) -> str:
        return f"http://{self.manifest.aggregator_hostname}/timemap/link/"


def _make_handler(manifest: FixtureManifest, timeout_sleep: float):
    pages = {p.uri: p for p in manifest.pages}
    site_hosts = manifest.site_hostnames()
    archive_hosts = manifest.archive_hostnames()
    soft404_hosts = {
        (urlsplit(p.uri).hostname or "").lower()
        for p in manifest.pages
        if p.behavior == "soft_404"
    }

    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, *args) -> None:  # keep test output quiet
            pass

        def do_GET(self) -> None:
            self._dispatch(send_body=True)

        def do_HEAD(self) -> None:
            self._dispatch(send_body=False)

        def _dispatch(self, send_body: bool) -> None:
            host = (self.headers.get("Host") or "").split(":")[0].lower()
            try:
                if host == manifest.aggregator_hostname:
                    self._aggregator(send_body)
                elif host in archive_hosts:
                    self._archive(host, send_body)
                elif host in site_hosts:
                    self._site(host, send_body)
                else:
                    self._respond(404, b"unknown host", send_body=send_body)
            except BrokenPipeError:
                pass

        def _respond(
            self,
            status: int,
            body: bytes,
            *,
            content_type: str = "text/html",
            extra: dict[str, str] | None = None,
            send_body: bool = True,
        ) -> None:
            self.send_response(status)
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(body)))
            for name, value in (extra or {}).items():
                self.send_header(name, value)
            self.end_headers()
            if send_body:
                self.wfile.write(body)

        # -- aggregator: TimeMap + TimeGate endpoints

        def _aggregator(self, send_body: bool) -> None:
            if self.path.startswith("/timemap/link/"):
                uri_r = unquote(self.path[len("/timemap/link/") :])
                snaps = manifest.snapshots_of(uri_r)
                if not snaps:
                    self._respond(404, b"no holdings", send_body=send_body)
                    return
                body = write_timemap(
                    uri_r, [(h.memento_uri(dt), dt) for dt, h in snaps]
                ).encode("utf-8")
                self._respond(
                    200, body, content_type="application/link-format", send_body=send_body
                )
            elif self.path.startswith("/timegate/"):
                self._timegate(send_body)
            else:
                self._respond(404, b"not found", send_body=send_body)

        def _timegate(self, send_body: bool) -> None:
            uri_r = unquote(self.path[len("/timegate/") :])
            snaps = manifest.snapshots_of(uri_r)
            if not snaps:
                self._respond(404, b"no holdings", send_body=send_body)
                return
            wanted = None
            accept = self.headers.get("Accept-Datetime")
            if accept:
                try:
                    wanted = parsedate_to_datetime(accept)
                except (TypeError, ValueError):
                    wanted = None
            if wanted is None:
                chosen_dt, chosen = snaps[-1]
            else:
                at_or_before = [(dt, h) for dt, h in snaps if dt <= wanted]
                chosen_dt, chosen = at_or_before[-1] if at_or_before else snaps[0]
            self._respond(
                302,
                b"",
                extra={
                    "Location": chosen.memento_uri(chosen_dt),
                    "Vary": "accept-datetime",
                },
                send_body=send_body,
            )

        # -- archives: wayback-style /web/<ts>/<original-uri>

        def _archive(self, host: str, send_body: bool) -> None:
            match = re.match(r"^/web/(\d{14})/(.+)$", self.path)
            if not match:
                self._respond(404, b"bad archive path", send_body=send_body)
                return
            stamp, original = match.groups()
            original = unquote(original)
            at = datetime.strptime(stamp, "%Y%m%d%H%M%S").replace(tzinfo=_UTC)
            page = pages.get(original)
            holding_ok = any(
                h.archive_hostname == host and h.page_uri == original and at in h.datetimes
                for h in manifest.holdings
            )
            version = page.version_at(at) if page else None
            if not holding_ok or version is None:
                self._respond(404, b"snapshot not held", send_body=send_body)
                return
            self._respond(
                200,
                version.body.encode("utf-8"),
                content_type=version.media_type,
                extra={"Memento-Datetime": format_datetime(at, usegmt=True)},
                send_body=send_body,
            )

        # -- live sites with misbehaviors

        def _site(self, host: str, send_body: bool) -> None:
            if host in soft404_hosts:
                # the whole host answers 200 with one constant page
                page = next(
                    p
                    for p in manifest.pages
                    if p.behavior == "soft_404"
                    and (urlsplit(p.uri).hostname or "").lower() == host
                )
                version = page.live_body
                self._respond(
                    200,
                    version.body.encode("utf-8"),
                    content_type=version.media_type,
                    send_body=send_body,
                )
                return
            uri = f"http://{host}{self.path}"
            page = pages.get(uri)
            if page is None:
                self._respond(404, b"<html><body>Not Found</body></html>", send_body=send_body)
                return
            behavior = page.behavior
            if behavior == "real_404":
                self._respond(404, b"<html><body>Not Found</body></html>", send_body=send_body)
                return
            if behavior == "timeout":
                time.sleep(timeout_sleep)
                self._respond(504, b"slow", send_body=send_body)
                return
            if behavior and behavior.startswith("status:"):
                self._respond(int(behavior.split(":", 1)[1]), b"error", send_body=send_body)
                return
            version = page.live_body
            self._respond(
                200,
                version.body.encode("utf-8"),
                content_type=version.media_type,
                send_body=send_body,
            )

    return Handler


# --- independent oracle ------------------------------------------------------

_TAG_RE = re.compile(r"<[^>]+>")
_SCRIPT_RE = re.compile(r"(?is)<(script|style)[^>]*>.*?</\1>")


def _naive_text(markup: str) -> str:
    """Brute-force text extraction, deliberately separate from the pipeline's."""
    stripped = _SCRIPT_RE.sub(" ", markup)
    stripped = _TAG_RE.sub(" ", stripped)
    return " ".join(html.unescape(stripped).split())


def _oracle_excluded(uri: str) -> bool:
    parts = urlsplit(uri)
    if parts.scheme not in ("http", "https"):
        return True
    host = (parts.hostname or "").lower()
    return not host or host == "localhost" or host.startswith("127.")


def oracle_verdicts(
    manifest: FixtureManifest, annotations: list[FixtureAnnotation] | None = None
) -> dict[str, str]:
    """Expected category per annotation, computed straight from the manifest."""
    anns = annotations if annotations is not None else manifest.annotations
    pages = {p.uri: p for p in manifest.pages}
    results: dict[str, str] = {}
    for ann in anns:
        if _oracle_excluded(ann.target_uri):
            results[ann.id] = "excluded"
            continue
        page = pages.get(ann.target_uri)

        live_attached = False
        if page is not None and page.behavior is None:
            live_attached = ann.exact in _naive_text(page.live_body.body)

        t = _second(ann.created_at)
        snaps = manifest.snapshots_of(ann.target_uri)
        before = [dt for dt, _ in snaps if dt <= t]
        after = [dt for dt, _ in snaps if dt > t]

        def side_attached(selected: datetime | None) -> str:
            if selected is None:
                return "no_memento"
            assert page is not None
            version = page.version_at(selected)
            assert version is not None
            return "yes" if ann.exact in _naive_text(version.body) else "no"

        before_state = side_attached(max(before) if before else None)
        after_state = side_attached(min(after) if after else None)

        memento_hit = "yes" in (before_state, after_state)
        if live_attached:
            results[ann.id] = "attached_archived" if memento_hit else "in_danger"
        else:
            results[ann.id] = "recoverable" if memento_hit else "orphaned"
    return results


# --- seeded random manifest generator ---------------------------------------

_ARCHIVE_POOL = ["web.archive.org", "archive.is", "wayback.archive-it.org"]
_BEHAVIOR_POOL = ["real_404", "real_404", "soft_404", "status:503", "timeout"]
_EPOCH = datetime(2015, 1, 1, tzinfo=_UTC)


def _filler(rng: random.Random, words: int) -> str:
    return " ".join(
        "".join(rng.choice("abcdefghijklmnopqrstuvwxyz") for _ in range(rng.randint(3, 9)))
        for _ in range(words)
    )


def _page_body(rng: random.Random, quotes: list[str]) -> str:
    paragraphs = [f"<p>{_filler(rng, rng.randint(4, 12))}</p>"]
    for quote in quotes:
        paragraphs.append(f"<p>{_filler(rng, 2)} {quote} {_filler(rng, 2)}</p>")
    paragraphs.append(f"<p>{_filler(rng, rng.randint(2, 6))}</p>")
    rng.shuffle(paragraphs)
    title = _filler(rng, 2)
    return (
        f"<html><head><title>{title}</title><script>var x = 1 < 2;</script></head>"
        f"<body>{''.join(paragraphs)}</body></html>"
    )


def generate_manifest(seed: int) -> FixtureManifest:
    """Random but fully deterministic manifest with oracle-filled expectations.

    Quote tokens use a digit-bearing namespace the alphabetic filler can
    never produce, so substring checks cannot match accidentally.
    """
    rng = random.Random(seed)
    manifest = FixtureManifest()
    quote_counter = 0

    for site_index in range(rng.randint(2, 3)):
        host = f"site{site_index}.fixture.test"
        for page_index in range(rng.randint(1, 2)):
            path = "/" if (page_index == 0 and rng.random() < 0.2) else f"/p{page_index}"
            uri = f"http://{host}{path}"

            annotations = []
            for _ in range(rng.randint(1, 2)):
                quote_counter += 1
                quote = f"hl{seed}q{quote_counter} anchor{quote_counter}z"
                annotations.append(quote)

            version_count = rng.randint(1, 3)
            base = _EPOCH + timedelta(days=rng.randint(0, 200))
            versions = []
            for v_index in range(version_count):
                present = [q for q in annotations if rng.random() < 0.65]
                versions.append(
                    PageVersion(
                        at=base + timedelta(days=30 * v_index, seconds=rng.randint(0, 86399)),
                        body=_page_body(rng, present),
                    )
                )
            behavior = rng.choice(_BEHAVIOR_POOL) if rng.random() < 0.22 else None
            page = FixturePage(
                uri=uri,
                versions=versions,
                live_index=rng.randrange(version_count),
                behavior=behavior,
            )
            manifest.pages.append(page)

            for archive in rng.sample(_ARCHIVE_POOL, rng.randint(1, len(_ARCHIVE_POOL))):
                held = [v.at for v in versions if rng.random() < 0.55]
                if held:
                    manifest.holdings.append(
                        ArchiveHolding(archive_hostname=archive, page_uri=uri, datetimes=held)
                    )

            span_start = versions[0].at - timedelta(days=20)
            span = (versions[-1].at - span_start) + timedelta(days=40)
            for quote in annotations:
                created = span_start + timedelta(
                    seconds=rng.randint(0, int(span.total_seconds())),
                    microseconds=rng.randint(0, 999999),
                )
                manifest.annotations.append(
                    FixtureAnnotation(
                        id=f"ann-{seed}-{len(manifest.annotations)}",
                        target_uri=uri,
                        exact=quote,
                        created_at=created,
                        note=_filler(rng, 3) if rng.random() < 0.5 else "",
                        tags=[_filler(rng, 1)] if rng.random() < 0.3 else [],
                    )
                )

    if rng.random() < 0.3:  # unresolvable targets exercise the excluded path
        bad_uri = rng.choice(["urn:x-pdf:deadbeef", "http://localhost/notes.html"])
        manifest.annotations.append(
            FixtureAnnotation(
                id=f"ann-{seed}-excluded",
                target_uri=bad_uri,
                exact=f"hl{seed}qx anchorxz",
                created_at=_EPOCH + timedelta(days=rng.randint(0, 300)),
            )
        )

    manifest.validate()
    manifest.expected_verdicts = oracle_verdicts(manifest)
    return manifest
