"""HTTP fetch layer shared by the live probe and the memento client.

A Fetcher performs exactly one request (no redirect following); the
``follow`` helper walks redirect chains so callers can record every hop.
Politeness rules live here: a bounded number of requests in flight
globally and at most one in flight per host.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from email.utils import parsedate_to_datetime
from datetime import datetime, timezone
from typing import Protocol
from urllib.parse import urljoin, urlsplit

import httpx

__all__ = ["FetchResult", "Fetcher", "HttpFetcher", "follow"]

TIMEOUT = "timeout"
CONN_ERROR = "conn_error"

_REDIRECT_STATUSES = frozenset({301, 302, 303, 307, 308})
_KEPT_HEADERS = ("content-type", "location", "memento-datetime", "retry-after", "link", "vary")


@dataclass(frozen=True)
class FetchResult:
    """Outcome of a single HTTP exchange (one hop, redirects not followed)."""

    url: str
    status: int | None
    error: str | None = None  # "timeout" | "conn_error" when status is None
    headers: dict[str, str] = field(default_factory=dict)
    body: bytes | None = None

    @property
    def failed(self) -> bool:
        return self.status is None

    @property
    def is_redirect(self) -> bool:
        return self.status in _REDIRECT_STATUSES and "location" in self.headers

    @property
    def media_type(self) -> str:
        return self.headers.get("content-type", "application/octet-stream")


class Fetcher(Protocol):
    def fetch(
        self, method: str, url: str, accept_datetime: datetime | None = None
    ) -> FetchResult: ...


def _retry_after_seconds(value: str | None, cap: float) -> float:
    if not value:
        return 1.0
    try:
        return min(float(int(value)), cap)
    except ValueError:
        pass
    try:
        when = parsedate_to_datetime(value)
        delta = (when - datetime.now(timezone.utc)).total_seconds()
        return min(max(delta, 0.0), cap)
    except (TypeError, ValueError):
        return 1.0


class HttpFetcher:
    """httpx-backed fetcher with host pinning and politeness limits.

    ``host_overrides`` maps a hostname to an "address:port" to connect to
    instead of resolving it (the curl --resolve analog); the original Host
    header is preserved so virtual-hosted test servers behave like the
    real sites.
    """

    def __init__(
        self,
        *,
        timeout_s: float = 30.0,
        user_agent: str = "annoaudit",
        max_inflight: int = 8,
        host_overrides: dict[str, str] | None = None,
        retry_after_cap_s: float = 60.0,
    ) -> None:
        self._user_agent = user_agent
        self._overrides = dict(host_overrides or {})
        self._retry_after_cap_s = retry_after_cap_s
        self._client = httpx.Client(follow_redirects=False, timeout=timeout_s)
        self._global = threading.BoundedSemaphore(max(1, max_inflight))
        self._host_locks: dict[str, threading.Lock] = {}
        self._host_locks_guard = threading.Lock()

    def close(self) -> None:
        self._client.close()

    def __enter__(self) -> "HttpFetcher":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _host_lock(self, host: str) -> threading.Lock:
        with self._host_locks_guard:
            lock = self._host_locks.get(host)
            if lock is None:
                lock = self._host_locks[host] = threading.Lock()
            return lock

    def _pin(self, url: str) -> tuple[str, dict[str, str]]:
        """Rewrite the connect address for overridden hosts, keeping Host."""
        parts = urlsplit(url)
        host = (parts.hostname or "").lower()
        target = self._overrides.get(host)
        if not target:
            return url, {}
        pinned = parts._replace(netloc=target)
        host_header = parts.netloc.rpartition("@")[2]  # drop any userinfo
        return pinned.geturl(), {"Host": host_header}

    def fetch(
        self, method: str, url: str, accept_datetime: datetime | None = None
    ) -> FetchResult:
        target_url, extra_headers = self._pin(url)
        headers = {"User-Agent": self._user_agent, **extra_headers}
        if accept_datetime is not None:
            from email.utils import format_datetime

            headers["Accept-Datetime"] = format_datetime(
                accept_datetime.astimezone(timezone.utc), usegmt=True
            )

        host = (urlsplit(url).hostname or "").lower()
        with self._host_lock(host):
            with self._global:
                result = self._fetch_once(method, url, target_url, headers)
                if result.status == 429:
                    time.sleep(
                        _retry_after_seconds(
                            result.headers.get("retry-after"), self._retry_after_cap_s
                        )
                    )
                    result = self._fetch_once(method, url, target_url, headers)
        return result

    def _fetch_once(
        self, method: str, url: str, target_url: str, headers: dict[str, str]
    ) -> FetchResult:
        try:
            response = self._client.request(method, target_url, headers=headers)
        except httpx.TimeoutException:
            return FetchResult(url=url, status=None, error=TIMEOUT)
        except (httpx.HTTPError, httpx.InvalidURL, httpx.UnsupportedProtocol):
            return FetchResult(url=url, status=None, error=CONN_ERROR)
        kept = {
            name: response.headers[name]
            for name in _KEPT_HEADERS
            if name in response.headers
        }
        body = None if method.upper() == "HEAD" else response.content
        return FetchResult(url=url, status=response.status_code, headers=kept, body=body)


def follow(
    fetcher: Fetcher,
    method: str,
    url: str,
    *,
    max_redirects: int = 10,
    accept_datetime: datetime | None = None,
) -> tuple[list[str], FetchResult]:
    """Fetch a URL following redirects; returns (chain of visited URLs, final result).

    The chain starts at the requested URL. When the redirect budget runs
    out, the last 3xx response is returned as the final result.
    """
    chain = [url]
    result = fetcher.fetch(method, url, accept_datetime=accept_datetime)
    hop_method = method
    while result.is_redirect and len(chain) <= max_redirects:
        next_url = urljoin(chain[-1], result.headers["location"])
        if result.status == 303:
            hop_method = "GET"
        chain.append(next_url)
        result = fetcher.fetch(hop_method, next_url, accept_datetime=accept_datetime)
    return chain, result
