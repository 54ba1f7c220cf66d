"""Determine the live-web status of target URIs, including soft-4xx detection.

Status comes from a HEAD request (GET fallback for servers that reject
HEAD); bodies are fetched with GET only for 200 responses. A "soft" 4xx is
a page that answers 200 for a deliberately junked sibling path with
near-identical content: the site is showing the same not-found or
login wall for everything.
"""

from __future__ import annotations

import random
import string
from collections import Counter
from dataclasses import dataclass, replace
from enum import Enum
from typing import Union
from urllib.parse import urlsplit

from .config import AuditSettings
from .fetchlib import Fetcher, FetchResult, follow
from .textnorm import ExtractionUnavailable, extract_text

__all__ = [
    "ProbeGroup",
    "ProbeOutcome",
    "detect_soft_4xx",
    "mark_soft_4xx",
    "probe",
    "similarity",
    "soft404_probe_uri",
    "soft404_token",
]


class ProbeGroup(str, Enum):
    OK = "ok"
    ERROR = "error"


FinalStatus = Union[int, str]  # int status code, or "timeout" / "conn_error"


@dataclass(frozen=True)
class ProbeOutcome:
    uri: str
    final_status: FinalStatus
    redirect_chain: tuple[str, ...]
    soft_4xx: bool
    group: ProbeGroup
    body: bytes | None = None
    media_type: str | None = None

    def __post_init__(self) -> None:
        if self.soft_4xx and self.final_status != 200:
            raise ValueError("soft_4xx requires a 200 final status")
        expected = (
            ProbeGroup.OK
            if self.final_status == 200 and not self.soft_4xx
            else ProbeGroup.ERROR
        )
        if self.group is not expected:
            raise ValueError(f"group must be {expected} for this outcome")


def _status_of(result: FetchResult) -> FinalStatus:
    return result.status if result.status is not None else (result.error or "conn_error")


def _outcome(
    uri: str,
    chain: list[str],
    result: FetchResult,
    *,
    body: bytes | None = None,
    media_type: str | None = None,
) -> ProbeOutcome:
    status = _status_of(result)
    ok = status == 200
    return ProbeOutcome(
        uri=uri,
        final_status=status,
        redirect_chain=tuple(chain),
        soft_4xx=False,
        group=ProbeGroup.OK if ok else ProbeGroup.ERROR,
        body=body if ok else None,
        media_type=media_type if ok else None,
    )


def probe(uri: str, fetcher: Fetcher, settings: AuditSettings) -> ProbeOutcome:
    """Resolve the final status of a URI and capture the body on 200.

    HEAD first; 405/501 falls back to GET. Timeouts and connection
    failures become symbolic statuses, and anything that is not a clean
    200 lands in the error group.
    """
    chain, head = follow(fetcher, "HEAD", uri, max_redirects=settings.max_redirects)
    if head.status in (405, 501):
        chain, final = follow(fetcher, "GET", uri, max_redirects=settings.max_redirects)
    elif head.status == 200:
        # Bodies need GET; re-walk from the original URI so cached replays
        # record the chain the body actually came from.
        chain, final = follow(fetcher, "GET", uri, max_redirects=settings.max_redirects)
    else:
        return _outcome(uri, chain, head)
    return _outcome(uri, chain, final, body=final.body, media_type=final.media_type)


def mark_soft_4xx(outcome: ProbeOutcome) -> ProbeOutcome:
    """Reclassify a 200 outcome as a soft 4xx (error group, body dropped)."""
    if outcome.final_status != 200:
        raise ValueError("only 200 outcomes can be soft 4xx")
    return replace(
        outcome, soft_4xx=True, group=ProbeGroup.ERROR, body=None, media_type=None
    )


def _bigrams(text: str) -> Counter:
    return Counter(text[i : i + 2] for i in range(len(text) - 1))


def similarity(a: str, b: str) -> float:
    """Sørensen–Dice coefficient over character-bigram multisets, in [0, 1]."""
    if not a and not b:
        return 1.0
    if not a or not b:
        return 0.0
    bigrams_a = _bigrams(a)
    bigrams_b = _bigrams(b)
    total = sum(bigrams_a.values()) + sum(bigrams_b.values())
    if total == 0:  # two single-character inputs carry no bigrams
        return 1.0 if a == b else 0.0
    shared = sum((bigrams_a & bigrams_b).values())
    return 2.0 * shared / total


_TOKEN_ALPHABET = string.ascii_lowercase + string.digits


def soft404_token(seed: int, uri: str, length: int = 12) -> str:
    """Deterministic junk token for a URI: same (seed, uri) -> same token."""
    rng = random.Random(f"{seed}:{uri}")
    return "".join(rng.choice(_TOKEN_ALPHABET) for _ in range(length))


def soft404_probe_uri(uri: str, token: str) -> str:
    """Junk a URI's parent directory so the result almost surely 404s.

    The token is appended to the parent directory segment; for leaf-at-root
    and bare-root URIs a junk path segment is inserted/appended instead.
    """
    parts = urlsplit(uri)
    path = parts.path
    if path in ("", "/"):
        new_path = "/" + token
    else:
        segments = path.split("/")
        if len(segments) >= 3 and segments[-2]:
            segments[-2] += token
        else:
            segments = segments[:-1] + [token] + segments[-1:]
        new_path = "/".join(segments)
    return parts._replace(path=new_path).geturl()


def detect_soft_4xx(uri: str, fetcher: Fetcher, settings: AuditSettings) -> bool:
    """True iff the URI and a junked sibling both answer 200 with
    near-identical text (similarity at or above the configured threshold).

    Any non-200 on the junk path means the site distinguishes real from
    junk paths, so the original 200 is trusted.
    """
    _, original = follow(fetcher, "GET", uri, max_redirects=settings.max_redirects)
    if original.status != 200 or original.body is None:
        return False
    junk_uri = soft404_probe_uri(
        uri, soft404_token(settings.rng_seed, uri, settings.soft404_token_len)
    )
    _, junk = follow(fetcher, "GET", junk_uri, max_redirects=settings.max_redirects)
    if junk.status != 200 or junk.body is None:
        return False
    try:
        original_text = extract_text(original.body, original.media_type, settings.extractors)
        junk_text = extract_text(junk.body, junk.media_type, settings.extractors)
    except ExtractionUnavailable:
        return False
    return similarity(original_text.text, junk_text.text) >= settings.soft404_threshold
