"""Command-line front end: a thin client over the audit service.

Commands talk HTTP to the FastAPI app — in-process by default (no sockets,
so offline cache replays perform zero network operations), or to a remote
instance via --server. Exit codes: 0 success (possibly with warnings),
2 input error, 3 cache/IO error, 4 schema error.
"""

from __future__ import annotations

import asyncio
import sys
from pathlib import Path
from typing import Any

import click
import httpx

from .reporting import dump_json_doc, dump_json_lines
from .service import create_app

EXIT_INPUT = 2
EXIT_IO = 3
EXIT_SCHEMA = 4

_ERROR_EXITS = {"cache_io": EXIT_IO, "schema_mismatch": EXIT_SCHEMA, "bad_config": EXIT_INPUT}


class ServiceClient:
    """POSTs to the service, in-process unless a server URL is given."""

    def __init__(self, server: str | None = None):
        self.server = server

    def post(self, path: str, payload: dict[str, Any]) -> httpx.Response:
        return asyncio.run(self._post(path, payload))

    async def _post(self, path: str, payload: dict[str, Any]) -> httpx.Response:
        if self.server:
            async with httpx.AsyncClient(base_url=self.server, timeout=None) as client:
                return await client.post(path, json=payload)
        transport = httpx.ASGITransport(app=create_app())
        async with httpx.AsyncClient(
            transport=transport, base_url="http://annoaudit.internal", timeout=None
        ) as client:
            return await client.post(path, json=payload)


def _read_input(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        click.echo(f"error: cannot read {path}: {exc}", err=True)
        sys.exit(EXIT_INPUT)


def _write_output(path: Path, content: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(content, encoding="utf-8")
    except OSError as exc:
        click.echo(f"error: cannot write {path}: {exc}", err=True)
        sys.exit(EXIT_IO)


def _call(client: ServiceClient, path: str, payload: dict[str, Any]) -> dict[str, Any]:
    try:
        response = client.post(path, payload)
    except httpx.HTTPError as exc:
        click.echo(f"error: service request failed: {exc}", err=True)
        sys.exit(1)
    if response.status_code == 200:
        return response.json()
    detail: Any = None
    try:
        detail = response.json().get("detail")
    except ValueError:
        pass
    code = detail.get("code") if isinstance(detail, dict) else None
    message = detail.get("message") if isinstance(detail, dict) else detail
    click.echo(f"error: {message or response.text}", err=True)
    sys.exit(_ERROR_EXITS.get(code, 1))


def _parse_pairs(values: tuple[str, ...], flag: str) -> dict[str, str]:
    pairs = {}
    for value in values:
        key, sep, val = value.partition("=")
        if not sep or not key:
            click.echo(f"error: {flag} expects KEY=VALUE, got {value!r}", err=True)
            sys.exit(EXIT_INPUT)
        pairs[key] = val
    return pairs


@click.group(context_settings={"auto_envvar_prefix": "ANNOAUDIT"})
@click.version_option()
def main() -> None:
    """Audit highlighted-text annotations against the live web and archives."""


@main.command()
@click.option("--input", "input_path", required=True, help="newline-delimited annotation corpus")
@click.option("--out-dir", required=True, help="directory for census.json / census.txt")
@click.option("--server", default=None, help="remote service URL (default: in-process)")
def census(input_path: str, out_dir: str, server: str | None) -> None:
    """Count annotation types (highlight / note / tags combinations)."""
    corpus = _read_input(input_path)
    data = _call(ServiceClient(server), "/census", {"corpus": corpus})
    out = Path(out_dir)
    _write_output(
        out / "census.json",
        dump_json_doc(
            {
                "total": data["total"],
                "highlighted_total": data["highlighted_total"],
                "rows": data["rows"],
                "parse_errors": data["parse_errors"],
            }
        ),
    )
    _write_output(out / "census.txt", data["text"])
    click.echo(
        f"census: {data['total']} annotations, {data['highlighted_total']} highlighted, "
        f"{data['parse_errors']} parse errors"
    )


@main.command()
@click.option("--input", "input_path", required=True, help="newline-delimited annotation corpus")
@click.option("--out-dir", required=True, help="directory for verdicts.ndjson / summary.json")
@click.option("--cache-dir", default=None, help="HTTP exchange cache for reproducible runs")
@click.option("--offline", is_flag=True, help="replay from cache only; no network")
@click.option("--aggregator", default=None, help="memento aggregator TimeMap endpoint")
@click.option("--timeout", type=float, default=None, help="per-request timeout in seconds")
@click.option("--soft404-threshold", type=float, default=None, help="similarity cutoff in (0,1]")
@click.option("--seed", type=int, default=None, help="RNG seed for soft-404 probe tokens")
@click.option("--concurrency", type=int, default=None, help="concurrent annotation audits")
@click.option("--user-agent", default=None, help="User-Agent header for all fetches")
@click.option("--resolve", multiple=True, help="HOST=ADDR:PORT connect override (repeatable)")
@click.option("--extractor", multiple=True, help="MEDIATYPE=COMMAND text extractor (repeatable)")
@click.option("--server", default=None, help="remote service URL (default: in-process)")
def audit(
    input_path: str,
    out_dir: str,
    cache_dir: str | None,
    offline: bool,
    aggregator: str | None,
    timeout: float | None,
    soft404_threshold: float | None,
    seed: int | None,
    concurrency: int | None,
    user_agent: str | None,
    resolve: tuple[str, ...],
    extractor: tuple[str, ...],
    server: str | None,
) -> None:
    """Run the full audit pipeline and write verdicts plus a summary."""
    corpus = _read_input(input_path)
    config: dict[str, Any] = {"offline": offline}
    if cache_dir is not None:
        config["cache_dir"] = cache_dir
    if aggregator is not None:
        config["aggregator_base"] = aggregator
    if timeout is not None:
        config["timeout_s"] = timeout
    if soft404_threshold is not None:
        config["soft404_threshold"] = soft404_threshold
    if seed is not None:
        config["rng_seed"] = seed
    if concurrency is not None:
        config["concurrency"] = concurrency
    if user_agent is not None:
        config["user_agent"] = user_agent
    if resolve:
        config["host_overrides"] = _parse_pairs(resolve, "--resolve")
    if extractor:
        config["extractors"] = _parse_pairs(extractor, "--extractor")

    data = _call(ServiceClient(server), "/audit", {"corpus": corpus, "config": config})
    out = Path(out_dir)
    _write_output(out / "verdicts.ndjson", dump_json_lines(data["verdicts"]))
    _write_output(out / "summary.json", dump_json_doc(data["summary"]))
    click.echo(
        f"audit: {len(data['verdicts'])} verdicts, {data['skipped']} skipped, "
        f"{data['parse_errors']} parse errors, {data['warnings']} warnings"
    )


@main.command()
@click.option("--verdicts", "verdicts_path", required=True, help="verdicts.ndjson from audit")
@click.option("--out-dir", required=True, help="directory for report.json / report.txt")
@click.option("--server", default=None, help="remote service URL (default: in-process)")
def report(verdicts_path: str, out_dir: str, server: str | None) -> None:
    """Render the measurement tables from a verdicts file."""
    text = _read_input(verdicts_path)
    data = _call(ServiceClient(server), "/report", {"verdicts_ndjson": text})
    out = Path(out_dir)
    _write_output(out / "report.json", dump_json_doc(data["summary"]))
    _write_output(out / "report.txt", data["text"])
    click.echo(f"report: {data['summary']['total']} verdicts summarized")


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
def serve(host: str, port: int) -> None:
    """Run the audit service over the network."""
    import uvicorn

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
