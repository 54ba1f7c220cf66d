"""Serialize audit output and render the measurement tables.

Verdicts travel as newline-delimited JSON with an explicit schema_version;
the summary is a single JSON document. Text rendering mirrors the table
layouts of the measurement study for eyeball comparison.
"""

from __future__ import annotations

import json
from typing import Any, Iterable, Sequence

from .audit import (
    SCHEMA_VERSION,
    AuditSummary,
    AuditVerdict,
    Category,
    LiveAttachment,
    ProbeSummary,
    SideAttachment,
)
from .ingest import TypeCensus
from .triage import TriageClass

__all__ = [
    "SchemaMismatch",
    "dump_json_doc",
    "dump_json_lines",
    "dump_summary",
    "dump_verdicts",
    "load_verdicts",
    "render_census_text",
    "render_report_text",
    "verdict_from_dict",
]


class SchemaMismatch(Exception):
    """A verdicts file was written by an incompatible schema version."""


def dump_json_lines(objs: Iterable[dict[str, Any]]) -> str:
    """Canonical newline-delimited JSON: stable key order, compact separators."""
    return "".join(
        json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":")) + "\n"
        for obj in objs
    )


def dump_json_doc(obj: dict[str, Any]) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, indent=2) + "\n"


def dump_verdicts(verdicts: Iterable[AuditVerdict]) -> str:
    return dump_json_lines(v.to_dict() for v in verdicts)


def dump_summary(summary: AuditSummary) -> str:
    return dump_json_doc(summary.to_dict())


def verdict_from_dict(data: dict[str, Any]) -> AuditVerdict:
    if data.get("schema_version") != SCHEMA_VERSION:
        raise SchemaMismatch(
            f"verdict schema_version {data.get('schema_version')!r}, expected {SCHEMA_VERSION}"
        )
    probe = data.get("probe")
    return AuditVerdict(
        annotation_id=data["annotation_id"],
        target_uri=data["target_uri"],
        created_at=data["created_at"],
        triage_class=TriageClass(data["triage_class"]),
        category=Category(data["category"]),
        probe=(
            ProbeSummary(
                final_status=probe["final_status"],
                soft_4xx=probe["soft_4xx"],
                redirect_chain=tuple(probe["redirect_chain"]),
            )
            if probe
            else None
        ),
        live_attached=(
            LiveAttachment(data["live_attached"]) if data.get("live_attached") else None
        ),
        before_attached=(
            SideAttachment(data["before_attached"]) if data.get("before_attached") else None
        ),
        after_attached=(
            SideAttachment(data["after_attached"]) if data.get("after_attached") else None
        ),
        recovering_archives=tuple(data.get("recovering_archives") or ()),
        caveats=tuple(data.get("caveats") or ()),
        trace=tuple(data.get("trace") or ()),
    )


def load_verdicts(text: str) -> list[AuditVerdict]:
    """Parse a verdicts file; raises SchemaMismatch on version drift."""
    verdicts = []
    for line in text.splitlines():
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaMismatch(f"unreadable verdict line: {exc}") from exc
        verdicts.append(verdict_from_dict(data))
    return verdicts


# --- text rendering ----------------------------------------------------------

_STATUS_DISPLAY = {
    "timeout": "Time out",
    "conn_error": "Connection error",
    "soft_4xx": "Soft 401/403/404",
    "localhost": "localhost",
    "urn": "URN",
    "malformed": "Unknown",
}

_CATEGORY_DISPLAY = {
    "attached_archived": "Attached & archived",
    "in_danger": "In danger",
    "recoverable": "Recoverable",
    "orphaned": "Orphaned",
    "indeterminate": "Indeterminate",
    "excluded": "Excluded",
}


def _table(title: str, headers: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    cells = [[str(c) for c in row] for row in rows]
    widths = [len(h) for h in headers]
    for row in cells:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))

    def _just(cell: str, width: int) -> str:
        # numbers read best right-aligned, text left-aligned
        return cell.rjust(width) if cell[:1].isdigit() else cell.ljust(width)

    lines = [title, "-" * len(title)]
    lines.append("  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)).rstrip())
    for row in cells:
        lines.append("  ".join(_just(row[i], widths[i]) for i in range(len(row))).rstrip())
    return "\n".join(lines)


def _yn(flag: bool) -> str:
    return "Yes" if flag else "No"


def render_census_text(census: TypeCensus, parse_errors: int = 0) -> str:
    rows = [
        [row["count"], _yn(row["highlight"]), _yn(row["note"]), _yn(row["tags"])]
        for row in census.rows()
    ]
    table = _table(
        "Annotation types", ["Count", "Highlight", "Note", "Tags"], rows
    )
    footer = (
        f"\nTotal: {census.total}"
        f"\nHighlighted text: {census.highlighted_total}"
        f"\nParse errors: {parse_errors}\n"
    )
    return table + footer


def render_report_text(summary: dict[str, Any]) -> str:
    """Aligned text tables from a summary document (to_dict form)."""
    sections: list[str] = []

    status_rows = [
        [count, _STATUS_DISPLAY.get(label, label)]
        for label, count in summary["status_histogram"].items()
    ]
    sections.append(_table("HTTP status of target URIs", ["Count", "Status"], status_rows))

    sections.append(
        _table(
            "Mementos on both sides of the annotation date",
            ["Count", "Live", "Memento (L)", "Memento (R)"],
            [
                [r["count"], _yn(r["live"]), _yn(r["before"]), _yn(r["after"])]
                for r in summary["both_sides"]
            ],
        )
    )
    sections.append(
        _table(
            "Mementos only before the annotation date",
            ["Count", "Live", "Memento (L)"],
            [[r["count"], _yn(r["live"]), _yn(r["before"])] for r in summary["left_only"]],
        )
    )
    sections.append(
        _table(
            "Mementos only after the annotation date",
            ["Count", "Live", "Memento (R)"],
            [[r["count"], _yn(r["live"]), _yn(r["after"])] for r in summary["right_only"]],
        )
    )
    sections.append(
        _table(
            "No existing mementos",
            ["Count", "Live"],
            [[r["count"], _yn(r["live"])] for r in summary["no_memento"]],
        )
    )

    archive_rows = [
        [
            r["archive"],
            f"{r['attached']} ({r['attached_pct']:.2f}%)",
            f"{r['not_attached']} ({r['not_attached_pct']:.2f}%)",
        ]
        for r in summary["archives"]
    ]
    if archive_rows:
        total_att = sum(r["attached"] for r in summary["archives"])
        total_not = sum(r["not_attached"] for r in summary["archives"])
        pct_att = sum(r["attached_pct"] for r in summary["archives"])
        pct_not = sum(r["not_attached_pct"] for r in summary["archives"])
        archive_rows.append(
            ["Total", f"{total_att} ({pct_att:.2f}%)", f"{total_not} ({pct_not:.2f}%)"]
        )
    sections.append(
        _table(
            "Targets recovered by archives (ties multi-counted; totals may exceed 100%)",
            ["Archive", "Attached to live web", "Not attached to live web"],
            archive_rows,
        )
    )

    category_rows = []
    percentages = summary.get("category_percentages", {})
    for key, count in sorted(
        summary["category_counts"].items(), key=lambda kv: (-kv[1], kv[0])
    ):
        pct = percentages.get(key)
        category_rows.append(
            [count, _CATEGORY_DISPLAY.get(key, key), f"{pct:.2f}%" if pct is not None else ""]
        )
    sections.append(
        _table("Annotation status", ["Count", "Category", "% of audited"], category_rows)
    )

    footer = (
        f"\nTotal annotations: {summary['total']}"
        f"\nExcluded (unresolvable targets): {summary['excluded']}"
        f"\nAudited: {summary['audited']}"
        f"\nAttached to live web: {summary['live_attached_total']}"
        f"\nNot attached to live web: {summary['live_not_attached_total']}"
        f"\nIndeterminate (archive status unknown): {summary['indeterminate']}"
        f"\nWarnings: {summary['warnings']}\n"
    )
    return "\n\n".join(sections) + footer
