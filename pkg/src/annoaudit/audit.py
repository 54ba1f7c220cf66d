"""Orchestrate the audit of one annotation and aggregate corpus statistics.

Per annotation: triage the target URI, probe the live web, test quote
attachment against the live page, discover the nearest mementos around the
annotation's creation date, and test attachment against every tied memento
on each side. The verdict category falls out of the three attachment
states; aggregation reproduces the measurement tables.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Iterable, Sequence

from .config import AuditSettings
from .fetchlib import Fetcher, follow
from .ingest import AnnotationRecord
from .memento import (
    MementoRef,
    TimeMapUnavailable,
    fetch_timemap,
    nearest_pair,
)
from .probe import ProbeGroup, ProbeOutcome, detect_soft_4xx, mark_soft_4xx, probe
from .textnorm import ExtractionUnavailable, Representation, extract_text, quote_attached
from .triage import TriageClass, triage_uri

__all__ = [
    "AuditDeps",
    "AuditVerdict",
    "Category",
    "LiveAttachment",
    "SideAttachment",
    "aggregate",
    "AuditSummary",
    "audit_annotation",
    "categorize",
    "run_audit",
]

SCHEMA_VERSION = 1

RendererHook = Callable[[str], "bytes | None"]


class LiveAttachment(str, Enum):
    YES = "yes"
    NO = "no"
    INACCESSIBLE = "inaccessible"


class SideAttachment(str, Enum):
    YES = "yes"
    NO = "no"
    NO_MEMENTO = "no_memento"
    UNKNOWN = "unknown"


class Category(str, Enum):
    EXCLUDED = "excluded"
    ATTACHED_ARCHIVED = "attached_archived"
    IN_DANGER = "in_danger"
    RECOVERABLE = "recoverable"
    ORPHANED = "orphaned"
    INDETERMINATE = "indeterminate"


def categorize(
    live: LiveAttachment, before: SideAttachment, after: SideAttachment
) -> Category:
    """Map the three attachment states to a verdict category (total function)."""
    some_memento_attached = SideAttachment.YES in (before, after)
    some_side_unknown = SideAttachment.UNKNOWN in (before, after)
    if live is LiveAttachment.YES:
        if some_memento_attached:
            return Category.ATTACHED_ARCHIVED
        if some_side_unknown:
            return Category.INDETERMINATE
        return Category.IN_DANGER
    if some_memento_attached:
        return Category.RECOVERABLE
    if some_side_unknown:
        return Category.INDETERMINATE
    return Category.ORPHANED


@dataclass(frozen=True)
class ProbeSummary:
    final_status: int | str
    soft_4xx: bool
    redirect_chain: tuple[str, ...]

    @classmethod
    def from_outcome(cls, outcome: ProbeOutcome) -> "ProbeSummary":
        return cls(
            final_status=outcome.final_status,
            soft_4xx=outcome.soft_4xx,
            redirect_chain=outcome.redirect_chain,
        )


@dataclass(frozen=True)
class AuditVerdict:
    annotation_id: str
    target_uri: str
    created_at: str  # ISO-8601
    triage_class: TriageClass
    category: Category
    probe: ProbeSummary | None = None
    live_attached: LiveAttachment | None = None
    before_attached: SideAttachment | None = None
    after_attached: SideAttachment | None = None
    recovering_archives: tuple[str, ...] = ()
    caveats: tuple[str, ...] = ()
    trace: tuple[dict[str, Any], ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "annotation_id": self.annotation_id,
            "target_uri": self.target_uri,
            "created_at": self.created_at,
            "triage_class": self.triage_class.value,
            "category": self.category.value,
            "probe": (
                {
                    "final_status": self.probe.final_status,
                    "soft_4xx": self.probe.soft_4xx,
                    "redirect_chain": list(self.probe.redirect_chain),
                }
                if self.probe
                else None
            ),
            "live_attached": self.live_attached.value if self.live_attached else None,
            "before_attached": self.before_attached.value if self.before_attached else None,
            "after_attached": self.after_attached.value if self.after_attached else None,
            "recovering_archives": list(self.recovering_archives),
            "caveats": list(self.caveats),
            "trace": list(self.trace),
        }


@dataclass
class AuditDeps:
    """Capabilities the per-annotation audit needs."""

    fetcher: Fetcher
    settings: AuditSettings
    renderer_hook: RendererHook | None = None


def _check_live(
    record: AnnotationRecord,
    outcome: ProbeOutcome,
    deps: AuditDeps,
    trace: list[dict[str, Any]],
    caveats: list[str],
) -> LiveAttachment:
    if outcome.group is not ProbeGroup.OK or outcome.body is None:
        return LiveAttachment.INACCESSIBLE
    try:
        text = extract_text(
            outcome.body, outcome.media_type or "", deps.settings.extractors
        )
    except ExtractionUnavailable as exc:
        caveats.append(f"extraction_unavailable:live:{exc.media_type}")
        trace.append({"step": "live_check", "attached": False, "extracted": False})
        return LiveAttachment.NO
    if text.lossy:
        caveats.append("lossy_decode:live")
    check = quote_attached(text, record.exact, Representation.live())
    attached = check.attached
    if not attached and deps.renderer_hook is not None:
        # Second pass for script-heavy pages: re-fetch through the
        # registered renderer and re-test before concluding "not attached".
        rendered = deps.renderer_hook(record.target_uri)
        if rendered is not None:
            try:
                rendered_text = extract_text(
                    rendered, outcome.media_type or "text/html", deps.settings.extractors
                )
                attached = quote_attached(
                    rendered_text, record.exact, Representation.live()
                ).attached
            except ExtractionUnavailable:
                pass
            trace.append({"step": "renderer_recheck", "attached": attached})
    trace.append({"step": "live_check", "attached": attached, "extracted": True})
    return LiveAttachment.YES if attached else LiveAttachment.NO


def _check_side(
    refs: Sequence[MementoRef],
    record: AnnotationRecord,
    deps: AuditDeps,
    trace: list[dict[str, Any]],
    caveats: list[str],
) -> tuple[SideAttachment, list[str]]:
    """Test the quote against every tied memento on one side.

    Every tied memento is still checked after the first hit so archive
    attribution stays complete. A side where no memento could even be
    fetched is unknown, not "no": a flaky archive must not mint orphans.
    """
    if not refs:
        return SideAttachment.NO_MEMENTO, []
    archives: list[str] = []
    evaluated = 0
    for ref in refs:
        _, result = follow(
            deps.fetcher, "GET", ref.uri_m, max_redirects=deps.settings.max_redirects
        )
        if result.status != 200 or result.body is None:
            trace.append(
                {
                    "step": "memento_fetch_failed",
                    "uri_m": ref.uri_m,
                    "status": result.status if result.status is not None else result.error,
                }
            )
            continue
        try:
            text = extract_text(result.body, result.media_type, deps.settings.extractors)
        except ExtractionUnavailable as exc:
            caveats.append(f"extraction_unavailable:memento:{exc.media_type}")
            evaluated += 1
            continue
        evaluated += 1
        check = quote_attached(text, record.exact, Representation.memento(ref.uri_m))
        trace.append(
            {"step": "memento_check", "uri_m": ref.uri_m, "attached": check.attached}
        )
        if check.attached:
            archives.append(ref.archive)
    if archives:
        return SideAttachment.YES, archives
    if evaluated == 0:
        return SideAttachment.UNKNOWN, []
    return SideAttachment.NO, []


def audit_annotation(record: AnnotationRecord, deps: AuditDeps) -> AuditVerdict:
    """Run the full per-annotation pipeline and return its verdict."""
    trace: list[dict[str, Any]] = []
    caveats: list[str] = []
    created_at = record.created_at.isoformat()

    triaged = triage_uri(record.target_uri)
    trace.append({"step": "triage", "class": triaged.triage_class.value})
    if triaged.excluded:
        return AuditVerdict(
            annotation_id=record.id,
            target_uri=record.target_uri,
            created_at=created_at,
            triage_class=triaged.triage_class,
            category=Category.EXCLUDED,
            trace=tuple(trace),
        )

    outcome = probe(record.target_uri, deps.fetcher, deps.settings)
    if outcome.final_status == 200 and detect_soft_4xx(
        record.target_uri, deps.fetcher, deps.settings
    ):
        outcome = mark_soft_4xx(outcome)
    trace.append(
        {
            "step": "probe",
            "final_status": outcome.final_status,
            "soft_4xx": outcome.soft_4xx,
            "redirects": len(outcome.redirect_chain) - 1,
        }
    )

    live = _check_live(record, outcome, deps, trace, caveats)

    try:
        timemap = fetch_timemap(
            record.target_uri,
            deps.settings.aggregator_base,
            deps.fetcher,
            max_redirects=deps.settings.max_redirects,
        )
    except TimeMapUnavailable as exc:
        trace.append({"step": "timemap", "error": str(exc)})
        before, after = SideAttachment.UNKNOWN, SideAttachment.UNKNOWN
        archives: list[str] = []
    else:
        trace.append({"step": "timemap", "mementos": len(timemap.mementos)})
        hood = nearest_pair(timemap, record.created_at)
        before, before_archives = _check_side(hood.before, record, deps, trace, caveats)
        after, after_archives = _check_side(hood.after, record, deps, trace, caveats)
        archives = sorted(set(before_archives) | set(after_archives))

    return AuditVerdict(
        annotation_id=record.id,
        target_uri=record.target_uri,
        created_at=created_at,
        triage_class=triaged.triage_class,
        category=categorize(live, before, after),
        probe=ProbeSummary.from_outcome(outcome),
        live_attached=live,
        before_attached=before,
        after_attached=after,
        recovering_archives=tuple(archives),
        caveats=tuple(sorted(set(caveats))),
        trace=tuple(trace),
    )


def run_audit(
    records: Sequence[AnnotationRecord], deps: AuditDeps
) -> list[AuditVerdict]:
    """Audit records concurrently; output order matches input order."""
    if not records:
        return []
    workers = max(1, min(deps.settings.concurrency, len(records)))
    if workers == 1:
        return [audit_annotation(record, deps) for record in records]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda r: audit_annotation(r, deps), records))


# --- aggregation -----------------------------------------------------------

_TRIAGE_STATUS_LABELS = {
    TriageClass.EXCLUDED_LOCALHOST: "localhost",
    TriageClass.EXCLUDED_URN: "urn",
    TriageClass.EXCLUDED_MALFORMED: "malformed",
}

# Fixed row orders mirroring the measurement tables, attached rows first.
_BOTH_SIDES_ROWS = [
    (True, True, True),
    (True, True, False),
    (True, False, True),
    (True, False, False),
    (False, True, True),
    (False, True, False),
    (False, False, True),
    (False, False, False),
]
_ONE_SIDE_ROWS = [(True, True), (True, False), (False, True), (False, False)]

_KNOWN = (SideAttachment.YES, SideAttachment.NO)


@dataclass
class AuditSummary:
    total: int = 0
    excluded: int = 0
    audited: int = 0
    indeterminate: int = 0
    category_counts: dict[str, int] = field(default_factory=dict)
    live_attached_total: int = 0
    live_not_attached_total: int = 0
    status_histogram: dict[str, int] = field(default_factory=dict)
    both_sides: list[dict[str, Any]] = field(default_factory=list)
    left_only: list[dict[str, Any]] = field(default_factory=list)
    right_only: list[dict[str, Any]] = field(default_factory=list)
    no_memento: list[dict[str, Any]] = field(default_factory=list)
    unknown_side: int = 0
    archives: list[dict[str, Any]] = field(default_factory=list)
    warnings: int = 0

    @property
    def percentage_base(self) -> int:
        return self.audited - self.indeterminate

    def category_percentages(self) -> dict[str, float]:
        base = self.percentage_base
        if base == 0:
            return {}
        main = (
            Category.ATTACHED_ARCHIVED,
            Category.IN_DANGER,
            Category.RECOVERABLE,
            Category.ORPHANED,
        )
        return {
            c.value: 100.0 * self.category_counts.get(c.value, 0) / base for c in main
        }

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "total": self.total,
            "excluded": self.excluded,
            "audited": self.audited,
            "indeterminate": self.indeterminate,
            "percentage_base": self.percentage_base,
            "category_counts": dict(sorted(self.category_counts.items())),
            "category_percentages": {
                k: round(v, 2) for k, v in sorted(self.category_percentages().items())
            },
            "live_attached_total": self.live_attached_total,
            "live_not_attached_total": self.live_not_attached_total,
            "status_histogram": dict(
                sorted(self.status_histogram.items(), key=lambda kv: (-kv[1], kv[0]))
            ),
            "both_sides": self.both_sides,
            "left_only": self.left_only,
            "right_only": self.right_only,
            "no_memento": self.no_memento,
            "unknown_side": self.unknown_side,
            "archives": self.archives,
            "warnings": self.warnings,
        }


def _status_label(verdict: AuditVerdict) -> str:
    if verdict.triage_class.excluded:
        return _TRIAGE_STATUS_LABELS[verdict.triage_class]
    assert verdict.probe is not None
    if verdict.probe.soft_4xx:
        return "soft_4xx"
    return str(verdict.probe.final_status)


def aggregate(verdicts: Iterable[AuditVerdict]) -> AuditSummary:
    """Corpus-level counts and the measurement tables.

    Percentages use the audited total (exclusions reported separately,
    indeterminate verdicts outside the percentage base). The per-archive
    table multi-counts annotations recovered by several archives, so its
    totals can exceed 100%.
    """
    summary = AuditSummary()
    both: dict[tuple[bool, bool, bool], int] = {row: 0 for row in _BOTH_SIDES_ROWS}
    left: dict[tuple[bool, bool], int] = {row: 0 for row in _ONE_SIDE_ROWS}
    right: dict[tuple[bool, bool], int] = {row: 0 for row in _ONE_SIDE_ROWS}
    none_rows: dict[bool, int] = {True: 0, False: 0}
    archive_counts: dict[str, dict[str, int]] = {}

    for verdict in verdicts:
        summary.total += 1
        summary.status_histogram[_status_label(verdict)] = (
            summary.status_histogram.get(_status_label(verdict), 0) + 1
        )
        summary.category_counts[verdict.category.value] = (
            summary.category_counts.get(verdict.category.value, 0) + 1
        )
        if verdict.category is Category.EXCLUDED:
            summary.excluded += 1
            continue

        summary.audited += 1
        if verdict.category is Category.INDETERMINATE:
            summary.indeterminate += 1
        live_yes = verdict.live_attached is LiveAttachment.YES
        if live_yes:
            summary.live_attached_total += 1
        else:
            summary.live_not_attached_total += 1

        before, after = verdict.before_attached, verdict.after_attached
        if SideAttachment.UNKNOWN in (before, after):
            summary.unknown_side += 1
        elif before in _KNOWN and after in _KNOWN:
            both[(live_yes, before is SideAttachment.YES, after is SideAttachment.YES)] += 1
        elif before in _KNOWN:
            left[(live_yes, before is SideAttachment.YES)] += 1
        elif after in _KNOWN:
            right[(live_yes, after is SideAttachment.YES)] += 1
        else:
            none_rows[live_yes] += 1

        for label in verdict.recovering_archives:
            bucket = archive_counts.setdefault(label, {"attached": 0, "not_attached": 0})
            bucket["attached" if live_yes else "not_attached"] += 1

    summary.warnings = summary.unknown_side
    summary.both_sides = [
        {"live": l, "before": b, "after": a, "count": both[(l, b, a)]}
        for (l, b, a) in _BOTH_SIDES_ROWS
    ]
    summary.left_only = [
        {"live": l, "before": b, "count": left[(l, b)]} for (l, b) in _ONE_SIDE_ROWS
    ]
    summary.right_only = [
        {"live": l, "after": a, "count": right[(l, a)]} for (l, a) in _ONE_SIDE_ROWS
    ]
    summary.no_memento = [
        {"live": True, "count": none_rows[True]},
        {"live": False, "count": none_rows[False]},
    ]

    attached_base = summary.category_counts.get(Category.ATTACHED_ARCHIVED.value, 0)
    recoverable_base = summary.category_counts.get(Category.RECOVERABLE.value, 0)
    rows = []
    for label, bucket in archive_counts.items():
        rows.append(
            {
                "archive": label,
                "attached": bucket["attached"],
                "attached_pct": (
                    round(100.0 * bucket["attached"] / attached_base, 2)
                    if attached_base
                    else 0.0
                ),
                "not_attached": bucket["not_attached"],
                "not_attached_pct": (
                    round(100.0 * bucket["not_attached"] / recoverable_base, 2)
                    if recoverable_base
                    else 0.0
                ),
            }
        )
    rows.sort(key=lambda r: (-(r["attached"] + r["not_attached"]), r["archive"]))
    summary.archives = rows
    return summary
