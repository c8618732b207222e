"""Headless entry points: simulate, analyze, replay, serve.

Exit codes: 0 success, 2 config errors, 3 I/O errors, 4 log/protocol
format errors.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .analysis import analyze_log, export_tables, replay_events, replay_summary, write_report
from .errors import (
    CorruptLineError,
    InvalidConfigError,
    SchemaViolationError,
    StartLabError,
    TooFewSamplesError,
)
from .persistence import SessionConfig, SessionLogWriter, read_log
from .session import SessionRuntime

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_FORMAT = 4


def _fail(code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load_config(path: str, seed_override: int | None) -> SessionConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        _fail(EXIT_IO, f"cannot read config: {exc}")
    except json.JSONDecodeError as exc:
        _fail(EXIT_CONFIG, f"config is not valid JSON: {exc}")
    if seed_override is not None:
        raw["seed"] = seed_override
    try:
        return SessionConfig.from_dict(raw)
    except InvalidConfigError as exc:
        _fail(EXIT_CONFIG, str(exc))


@click.group()
def main() -> None:
    """Race-start reaction-time laboratory."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(), help="Session config JSON.")
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--out", "out_path", required=True, type=click.Path(), help="Output session log (JSONL).")
def simulate(config_path: str, seed: int | None, out_path: str) -> None:
    """Run a full simulated session and write its log."""
    config = _load_config(config_path, seed)
    if config.mode != "simulated":
        _fail(EXIT_CONFIG, "simulate requires a config with mode=simulated")
    try:
        writer = SessionLogWriter(out_path, config)
    except OSError as exc:
        _fail(EXIT_IO, f"cannot open log for writing: {exc}")
    runtime = SessionRuntime(config, log_writer=writer)
    summary = runtime.run_all()
    writer.close()
    counts = summary["progress"]
    click.echo(
        f"simulated study {config.study}: {counts['executed']} trials "
        f"({counts['valid']} valid, {counts['false_start']} false starts, "
        f"{counts['retry']} retries) -> {out_path}"
    )


@main.command()
@click.option("--log", "log_path", required=True, type=click.Path(), help="Session log to analyze.")
@click.option("--report", "report_path", type=click.Path(), default=None, help="Report JSON output path.")
@click.option("--csv-dir", "csv_dir", type=click.Path(), default=None, help="Directory for CSV tables.")
def analyze(log_path: str, report_path: str | None, csv_dir: str | None) -> None:
    """Run the statistics pipeline over a session log."""
    try:
        log = read_log(log_path)
    except OSError as exc:
        _fail(EXIT_IO, f"cannot read log: {exc}")
    except CorruptLineError as exc:
        _fail(EXIT_FORMAT, str(exc))
    try:
        report = analyze_log(log)
    except (TooFewSamplesError, SchemaViolationError) as exc:
        _fail(EXIT_FORMAT, f"log not analyzable: {exc}")
    except InvalidConfigError as exc:
        _fail(EXIT_CONFIG, str(exc))
    report_path = report_path or str(Path(log_path).with_suffix(".report.json"))
    try:
        write_report(report, report_path)
        if csv_dir is not None:
            export_tables(log, csv_dir)
    except OSError as exc:
        _fail(EXIT_IO, f"cannot write outputs: {exc}")
    click.echo(f"report written to {report_path}")
    if csv_dir is not None:
        click.echo(f"CSV tables written to {csv_dir}")


@main.command()
@click.option("--log", "log_path", required=True, type=click.Path(), help="Session log to replay.")
@click.option("--summary", "show_summary", is_flag=True, help="Print the per-condition summary instead of events.")
def replay(log_path: str, show_summary: bool) -> None:
    """Print the event stream reconstructed from a log."""
    try:
        log = read_log(log_path)
    except OSError as exc:
        _fail(EXIT_IO, f"cannot read log: {exc}")
    except CorruptLineError as exc:
        _fail(EXIT_FORMAT, str(exc))
    if show_summary:
        click.echo(json.dumps(replay_summary(log), indent=2, sort_keys=True))
        return
    for event in replay_events(log):
        click.echo(json.dumps(event, sort_keys=True))


@main.command()
@click.option("--bind", default="127.0.0.1:8787", show_default=True, help="host:port to listen on.")
@click.option("--log-dir", "log_dir", type=click.Path(), default=None, help="Directory for session logs.")
@click.option(
    "--console-dir",
    type=click.Path(),
    default=None,
    help="Static directory with the built operator console (optional).",
)
def serve(bind: str, log_dir: str | None, console_dir: str | None) -> None:
    """Host the control service for the operator console."""
    from .server import serve as run_server
    from .service import ControlService

    service = ControlService(log_dir=log_dir)
    try:
        run_server(bind=bind, service=service, console_dir=console_dir)
    except OSError as exc:
        _fail(EXIT_IO, f"cannot bind {bind}: {exc}")
    except StartLabError as exc:
        _fail(EXIT_FORMAT, str(exc))


if __name__ == "__main__":
    main()
