"""Pydantic request/response models for the annotation audit service."""

from __future__ import annotations

from typing import Any, Union

from pydantic import BaseModel, Field

from .config import DEFAULT_AGGREGATOR, AuditSettings


class HealthResponse(BaseModel):
    status: str
    version: str
    schema_version: int


class CensusRequest(BaseModel):
    corpus: str = Field(description="newline-delimited annotation documents")


class CensusRow(BaseModel):
    highlight: bool
    note: bool
    tags: bool
    count: int


class CensusResponse(BaseModel):
    total: int
    highlighted_total: int
    rows: list[CensusRow]
    parse_errors: int
    text: str


class TriageRequest(BaseModel):
    uris: list[str]


class TriageItem(BaseModel):
    uri: str
    triage_class: str
    excluded: bool


class TriageResponse(BaseModel):
    results: list[TriageItem]


class AuditConfig(BaseModel):
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
    host_overrides: dict[str, str] = Field(default_factory=dict)
    extractors: dict[str, str] = Field(default_factory=dict)

    def to_settings(self) -> AuditSettings:
        return AuditSettings(**self.model_dump()).validate()


class AuditRequest(BaseModel):
    corpus: str
    config: AuditConfig = Field(default_factory=AuditConfig)


class ProbeModel(BaseModel):
    final_status: Union[int, str]
    soft_4xx: bool
    redirect_chain: list[str]


class VerdictModel(BaseModel):
    schema_version: int
    annotation_id: str
    target_uri: str
    created_at: str
    triage_class: str
    category: str
    probe: ProbeModel | None = None
    live_attached: str | None = None
    before_attached: str | None = None
    after_attached: str | None = None
    recovering_archives: list[str] = Field(default_factory=list)
    caveats: list[str] = Field(default_factory=list)
    trace: list[dict[str, Any]] = Field(default_factory=list)


class AuditResponse(BaseModel):
    verdicts: list[VerdictModel]
    summary: dict[str, Any]
    warnings: int
    parse_errors: int
    skipped: int


class ReportRequest(BaseModel):
    verdicts_ndjson: str


class ReportResponse(BaseModel):
    summary: dict[str, Any]
    text: str
