"""FastAPI service wrapping the audit engine.

The CLI talks to this app in-process by default; a deployed instance
serves the same endpoints over the network for other clients.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from . import __version__
from .audit import SCHEMA_VERSION, AuditDeps, aggregate, run_audit
from .cache import CacheWriteError
from .config import build_fetcher
from .ingest import census, load_corpus
from .reporting import (
    SchemaMismatch,
    load_verdicts,
    render_census_text,
    render_report_text,
)
from .schemas import (
    AuditRequest,
    AuditResponse,
    CensusRequest,
    CensusResponse,
    CensusRow,
    HealthResponse,
    ReportRequest,
    ReportResponse,
    TriageItem,
    TriageRequest,
    TriageResponse,
    VerdictModel,
)
from .triage import triage_uri

__all__ = ["create_app"]


def create_app() -> FastAPI:
    app = FastAPI(title="annoaudit", version=__version__)

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__, schema_version=SCHEMA_VERSION)

    @app.post("/census", response_model=CensusResponse)
    def census_endpoint(request: CensusRequest) -> CensusResponse:
        load = load_corpus(request.corpus)
        counted = census(load.items)
        return CensusResponse(
            total=counted.total,
            highlighted_total=counted.highlighted_total,
            rows=[CensusRow(**row) for row in counted.rows()],
            parse_errors=len(load.errors),
            text=render_census_text(counted, parse_errors=len(load.errors)),
        )

    @app.post("/triage", response_model=TriageResponse)
    def triage_endpoint(request: TriageRequest) -> TriageResponse:
        results = [triage_uri(uri) for uri in request.uris]
        return TriageResponse(
            results=[
                TriageItem(
                    uri=r.uri, triage_class=r.triage_class.value, excluded=r.excluded
                )
                for r in results
            ]
        )

    @app.post("/audit", response_model=AuditResponse)
    def audit_endpoint(request: AuditRequest) -> AuditResponse:
        try:
            settings = request.config.to_settings()
        except ValueError as exc:
            raise HTTPException(
                status_code=422, detail={"code": "bad_config", "message": str(exc)}
            ) from exc
        load = load_corpus(request.corpus)
        records = load.records
        fetcher = build_fetcher(settings)
        try:
            verdicts = run_audit(records, AuditDeps(fetcher=fetcher, settings=settings))
        except CacheWriteError as exc:
            raise HTTPException(
                status_code=500, detail={"code": "cache_io", "message": str(exc)}
            ) from exc
        finally:
            close = getattr(fetcher, "close", None)
            if close is not None:
                close()
        summary = aggregate(verdicts)
        return AuditResponse(
            verdicts=[VerdictModel(**v.to_dict()) for v in verdicts],
            summary=summary.to_dict(),
            warnings=summary.warnings,
            parse_errors=len(load.errors),
            skipped=len(load.items) - len(records),
        )

    @app.post("/report", response_model=ReportResponse)
    def report_endpoint(request: ReportRequest) -> ReportResponse:
        try:
            verdicts = load_verdicts(request.verdicts_ndjson)
        except SchemaMismatch as exc:
            raise HTTPException(
                status_code=422,
                detail={"code": "schema_mismatch", "message": str(exc)},
            ) from exc
        summary = aggregate(verdicts).to_dict()
        return ReportResponse(summary=summary, text=render_report_text(summary))

    return app
