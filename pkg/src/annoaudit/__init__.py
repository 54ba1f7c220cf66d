"""annoaudit: audit highlighted-text web annotations against the live web
and web archives, and classify each one as attached-and-archived, in danger,
recoverable, or orphaned."""

__version__ = "0.1.0"

from .audit import (  # noqa: E402
    AuditDeps,
    AuditVerdict,
    Category,
    LiveAttachment,
    SideAttachment,
    aggregate,
    audit_annotation,
    categorize,
    run_audit,
)
from .config import AuditSettings, build_fetcher  # noqa: E402
from .ingest import (  # noqa: E402
    AnnotationRecord,
    Skipped,
    TypeCensus,
    census,
    filter_highlighted,
    load_corpus,
    parse_annotation,
)
from .memento import (  # noqa: E402
    MementoNeighborhood,
    MementoRef,
    TimeMap,
    archive_host,
    fetch_timemap,
    nearest_pair,
    parse_timemap,
)
from .probe import ProbeOutcome, detect_soft_4xx, probe, similarity  # noqa: E402
from .textnorm import (  # noqa: E402
    AttachmentCheck,
    NormalizedText,
    extract_text,
    normalize,
    quote_attached,
)
from .triage import TriageClass, TriageResult, triage_uri  # noqa: E402

__all__ = [
    "AnnotationRecord",
    "AttachmentCheck",
    "AuditDeps",
    "AuditSettings",
    "AuditVerdict",
    "Category",
    "LiveAttachment",
    "MementoNeighborhood",
    "MementoRef",
    "NormalizedText",
    "ProbeOutcome",
    "SideAttachment",
    "Skipped",
    "TimeMap",
    "TriageClass",
    "TriageResult",
    "TypeCensus",
    "__version__",
    "aggregate",
    "archive_host",
    "audit_annotation",
    "build_fetcher",
    "categorize",
    "census",
    "detect_soft_4xx",
    "extract_text",
    "fetch_timemap",
    "filter_highlighted",
    "load_corpus",
    "nearest_pair",
    "normalize",
    "parse_annotation",
    "parse_timemap",
    "probe",
    "quote_attached",
    "run_audit",
    "similarity",
    "triage_uri",
]
