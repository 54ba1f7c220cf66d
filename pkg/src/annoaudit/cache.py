"""Content-addressed HTTP exchange cache for reproducible audit runs.

Live-web measurements are unrepeatable, so every exchange (including
failures) is recorded the first time it happens and replayed byte-for-byte
afterwards. Entries are keyed by (method, URI, Accept-Datetime); bodies are
stored once under their SHA-256 digest. The cache is append-only within a
run: an existing entry is never overwritten.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .fetchlib import CONN_ERROR, Fetcher, FetchResult

__all__ = ["CacheEntry", "CacheWriteError", "CachedFetcher", "HttpCache"]


class CacheWriteError(Exception):
    """The cache directory could not be created or written."""


@dataclass(frozen=True)
class CacheEntry:
    method: str
    url: str
    accept_datetime: str | None
    fetched_at: str
    status: int | None
    error: str | None
    headers: dict[str, str]
    body_digest: str | None


def _key(method: str, url: str, accept_datetime: str | None) -> str:
    material = "\n".join((method.upper(), url, accept_datetime or ""))
    return hashlib.sha256(material.encode("utf-8")).hexdigest()


class HttpCache:
    """Filesystem store: entries/<key>.json plus objects/<body digest>."""

    def __init__(self, root: str | os.PathLike[str]):
        self.root = Path(root)
        self.entries = self.root / "entries"
        self.objects = self.root / "objects"

    def _ensure_dirs(self) -> None:
        try:
            self.entries.mkdir(parents=True, exist_ok=True)
            self.objects.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise CacheWriteError(f"cannot create cache directory: {exc}") from exc

    def load(self, method: str, url: str, accept_datetime: str | None) -> CacheEntry | None:
        path = self.entries / (_key(method, url, accept_datetime) + ".json")
        try:
            raw = path.read_text(encoding="utf-8")
        except FileNotFoundError:
            return None
        data = json.loads(raw)
        return CacheEntry(**data)

    def body(self, digest: str) -> bytes:
        return (self.objects / digest).read_bytes()

    def store(
        self, method: str, url: str, accept_datetime: str | None, result: FetchResult
    ) -> CacheEntry:
        self._ensure_dirs()
        digest = None
        if result.body is not None:
            digest = hashlib.sha256(result.body).hexdigest()
            self._write_atomic(self.objects / digest, result.body)
        entry = CacheEntry(
            method=method.upper(),
            url=url,
            accept_datetime=accept_datetime,
            fetched_at=datetime.now(timezone.utc).isoformat(),
            status=result.status,
            error=result.error,
            headers=dict(result.headers),
            body_digest=digest,
        )
        path = self.entries / (_key(method, url, accept_datetime) + ".json")
        if not path.exists():  # append-only: first exchange wins
            payload = json.dumps(entry.__dict__, sort_keys=True).encode("utf-8")
            self._write_atomic(path, payload)
        return entry

    def _write_atomic(self, path: Path, payload: bytes) -> None:
        # unique temp name: concurrent writers of the same object must not
        # trample each other's temp file before the atomic rename
        tmp = path.with_suffix(f"{path.suffix}.{os.getpid()}.{threading.get_ident()}.tmp")
        try:
            tmp.write_bytes(payload)
            os.replace(tmp, path)
        except OSError as exc:
            raise CacheWriteError(f"cannot write cache file {path}: {exc}") from exc


class CachedFetcher:
    """Fetcher that records exchanges and replays them on later runs.

    With ``offline=True`` (or no inner fetcher) a cache miss is reported as
    a connection failure instead of touching the network; a warm cache
    therefore replays a whole run without any network activity.
    """

    def __init__(
        self,
        inner: Fetcher | None,
        cache: HttpCache,
        *,
        offline: bool = False,
    ) -> None:
        self._inner = inner
        self._cache = cache
        self._offline = offline

    def close(self) -> None:
        close = getattr(self._inner, "close", None)
        if close is not None:
            close()

    def fetch(
        self, method: str, url: str, accept_datetime: datetime | None = None
    ) -> FetchResult:
        ad = (
            accept_datetime.astimezone(timezone.utc).isoformat()
            if accept_datetime is not None
            else None
        )
        entry = self._cache.load(method, url, ad)
        if entry is not None:
            body = self._cache.body(entry.body_digest) if entry.body_digest else None
            return FetchResult(
                url=url,
                status=entry.status,
                error=entry.error,
                headers=dict(entry.headers),
                body=body,
            )
        if self._offline or self._inner is None:
            return FetchResult(url=url, status=None, error=CONN_ERROR)
        result = self._inner.fetch(method, url, accept_datetime=accept_datetime)
        self._cache.store(method, url, ad, result)
        return result
