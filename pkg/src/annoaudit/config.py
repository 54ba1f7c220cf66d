"""Run configuration shared by the audit engine, service, and CLI."""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime

from .cache import CachedFetcher, HttpCache
from .fetchlib import CONN_ERROR, Fetcher, FetchResult, HttpFetcher

__all__ = ["AuditSettings", "DEFAULT_AGGREGATOR", "build_fetcher"]

DEFAULT_AGGREGATOR = "http://timetravel.mementoweb.org/timemap/link/"


@dataclass
class AuditSettings:
    aggregator_base: str = DEFAULT_AGGREGATOR
    timeout_s: float = 30.0
    max_redirects: int = 10
    soft404_threshold: float = 0.93
    soft404_token_len: int = 12
    rng_seed: int = 0
    user_agent: str = "annoaudit/0.1"
    max_inflight: int = 8
    concurrency: int = 8
    offline: bool = False
    cache_dir: str | None = None
    # hostname -> "address:port" connect overrides (curl --resolve analog)
    host_overrides: dict[str, str] = field(default_factory=dict)
    # media type -> external extractor command (stdin bytes, stdout UTF-8)
    extractors: dict[str, str] = field(default_factory=dict)

    def validate(self) -> "AuditSettings":
        if not (0.0 < self.soft404_threshold <= 1.0):
            raise ValueError("soft404_threshold must be in (0, 1]")
        if self.timeout_s <= 0:
            raise ValueError("timeout_s must be positive")
        if self.max_redirects < 0:
            raise ValueError("max_redirects must be >= 0")
        if self.soft404_token_len < 1:
            raise ValueError("soft404_token_len must be >= 1")
        if self.concurrency < 1 or self.max_inflight < 1:
            raise ValueError("concurrency and max_inflight must be >= 1")
        return self


class _OfflineOnly:
    """Fetcher for offline runs without a cache: every fetch fails cleanly."""

    def fetch(
        self, method: str, url: str, accept_datetime: datetime | None = None
    ) -> FetchResult:
        return FetchResult(url=url, status=None, error=CONN_ERROR)


def build_fetcher(settings: AuditSettings) -> Fetcher:
    """Assemble the fetch stack for a run.

    Offline runs never construct a network client at all, so a warm cache
    is replayed with zero network operations by construction.
    """
    inner: Fetcher | None = None
    if not settings.offline:
        inner = HttpFetcher(
            timeout_s=settings.timeout_s,
            user_agent=settings.user_agent,
            max_inflight=settings.max_inflight,
            host_overrides=settings.host_overrides,
        )
    if settings.cache_dir:
        return CachedFetcher(inner, HttpCache(settings.cache_dir), offline=settings.offline)
    return inner if inner is not None else _OfflineOnly()
