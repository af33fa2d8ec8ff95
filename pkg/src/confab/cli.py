"""Command line entry points: serve, simulate, analyze."""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import click

from . import analytics
from .events import write_log
from .simharness import ScenarioSpec, run_scenario


@click.group()
def main() -> None:
    """Group deliberation sessions, simulation, and forecast analytics."""


@main.command()
@click.option("--port", default=8750, show_default=True, help="Listen port.")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="Session config JSON (or a list of question fixtures) to create at boot.")
@click.option("--log-dir", type=click.Path(file_okay=False), default=None,
              help="Directory for per-session JSONL event logs.")
@click.option("--analyzer", type=click.Choice(["mock", "http"]), default="mock",
              show_default=True, help="Dialog analyzer backend.")
@click.option("--seed", type=int, default=None, help="Override the session seed.")
@click.option("--static-dir", type=click.Path(file_okay=False), default=None,
              help="Directory with the built web client (served at /).")
def serve(port, config_path, log_dir, analyzer, seed, static_dir):
    """Run the live session server."""
    import os

    from .server import serve as serve_blocking

    if static_dir is None:
        candidates = [
            os.environ.get("CONFAB_STATIC_DIR"),
            Path.cwd() / "frontend" / "dist",
            Path(__file__).resolve().parents[2] / "frontend" / "dist",
        ]
        for candidate in candidates:
            if candidate and Path(candidate).is_dir():
                static_dir = str(candidate)
                break
    serve_blocking(
        port=port,
        config_path=config_path,
        log_dir=log_dir,
        analyzer=analyzer,
        seed=seed,
        static_dir=static_dir,
    )


@main.command()
@click.option("--scenario", "scenario_path", type=click.Path(exists=True), required=True,
              help="Scenario spec JSON.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True,
              help="Where to write the exported event log (JSONL).")
@click.option("--url", default=None,
              help="Drive a live server at this base URL instead of in-process.")
def simulate(scenario_path, out_path, url):
    """Run a scripted scenario and export its session event log."""
    spec = ScenarioSpec.from_json(scenario_path)
    if url:
        import asyncio

        from .simharness import run_scenario_ws

        records = asyncio.run(run_scenario_ws(spec, url))
    else:
        records = run_scenario(spec)
    write_log(out_path, records)
    finals = [r for r in records if r.kind == "round_finalized"]
    click.echo(f"wrote {len(records)} events ({len(finals)} rounds) to {out_path}")
    for rec in finals:
        f = rec.payload["forecast"]
        label = "toss-up" if f["is_tossup"] else f"pick {f['pick']} (risk {f['risk_points']})"
        click.echo(f"  {f['question_id']}: wcf={f['wcf']:+.3f} -> {label}")


@main.command()
@click.option("--logs", "log_dir", type=click.Path(exists=True, file_okay=False),
              required=True, help="Directory of session event logs (*.jsonl).")
@click.option("--outcomes", "outcomes_path", type=click.Path(exists=True, dir_okay=False),
              required=True, help="Outcomes CSV: question_id, covering_side, favorite_side.")
@click.option("--quantile", default=0.25, show_default=True,
              help="Conversation-rate cutoff quantile for the cohort split.")
@click.option("--format", "fmt", type=click.Choice(["table", "csv", "json"]),
              default="table", show_default=True)
def analyze(log_dir, outcomes_path, quantile, fmt):
    """Score picks against outcomes and print record/ROI/p-value cohorts."""
    started = time.perf_counter()
    logs = analytics.load_logs(log_dir)
    outcomes = analytics.load_outcomes_csv(outcomes_path)
    try:
        picks = analytics.score_picks(logs, outcomes)
    except analytics.MissingOutcome as exc:
        raise click.ClickException(f"no outcome for question {exc.args[0]!r}")
    rows = analytics.cohort_report(picks, quantile=quantile)

    if fmt == "table":
        click.echo(analytics.render_table(rows[:3]))
        click.echo()
        click.echo(analytics.render_table([rows[0], rows[3], rows[4]]))
    elif fmt == "csv":
        click.echo(analytics.render_csv(rows))
    else:
        click.echo(json.dumps(analytics.rows_as_json(rows), indent=2))
    elapsed = time.perf_counter() - started
    click.echo(
        f"\n{len(picks)} picks scored from {len(logs)} logs in {elapsed:.3f}s",
        err=True,
    )


if __name__ == "__main__":
    sys.exit(main())
