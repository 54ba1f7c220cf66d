"""Partition annotation target URIs into auditable vs. excluded classes.

Exclusion is purely syntactic: URIs that cannot name a publicly fetchable
web resource (loopback hosts, URN-style or other non-HTTP schemes, strings
that do not parse as absolute URIs) never reach the probe stage.
"""

from __future__ import annotations

import ipaddress
from dataclasses import dataclass
from enum import Enum
from urllib.parse import urlsplit

__all__ = ["TriageClass", "TriageResult", "triage_uri"]


class TriageClass(str, Enum):
    RESOLVABLE = "resolvable"
    EXCLUDED_LOCALHOST = "excluded_localhost"
    EXCLUDED_URN = "excluded_urn"
    EXCLUDED_MALFORMED = "excluded_malformed"

    @property
    def excluded(self) -> bool:
        return self is not TriageClass.RESOLVABLE


@dataclass(frozen=True)
class TriageResult:
    uri: str
    triage_class: TriageClass

    @property
    def excluded(self) -> bool:
        return self.triage_class.excluded


def _is_loopback_host(host: str) -> bool:
    if host == "localhost" or host.endswith(".localhost"):
        return True
    try:
        ip = ipaddress.ip_address(host)
    except ValueError:
        return False
    if ip.is_loopback:
        return True
    mapped = getattr(ip, "ipv4_mapped", None)
    return mapped is not None and mapped.is_loopback


def triage_uri(uri: str) -> TriageResult:
    """Classify one target URI. Pure function of the string; never raises."""
    try:
        parts = urlsplit(uri)
    except ValueError:
        return TriageResult(uri, TriageClass.EXCLUDED_MALFORMED)

    scheme = parts.scheme.lower()
    if not scheme:
        return TriageResult(uri, TriageClass.EXCLUDED_MALFORMED)
    if scheme not in ("http", "https"):
        # urn:, file:, chrome-extension:, about:, mailto:, ... are all
        # non-fetchable on the public live web.
        return TriageResult(uri, TriageClass.EXCLUDED_URN)

    host = (parts.hostname or "").lower()
    if not host:
        return TriageResult(uri, TriageClass.EXCLUDED_MALFORMED)
    if _is_loopback_host(host):
        return TriageResult(uri, TriageClass.EXCLUDED_LOCALHOST)
    return TriageResult(uri, TriageClass.RESOLVABLE)
