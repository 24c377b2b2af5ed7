"""Command-line entry point.

Subcommands: serve (HTTP service), simulate (synthetic campaigns),
batch (trigger a mini-batch on a running service), eval (offline
ranking metrics) and export (trace to CSV/SVG).

Machine-readable results go to stdout, diagnostics to stderr.  Exit
codes: 0 success, 2 usage or input error, 3 upstream unavailable.
"""

from __future__ import annotations

import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click

from .errors import BanditError
from .metrics import evaluate, load_interactions, load_ranked_lists
from .simulator import (
    CampaignConfig,
    EnvironmentSpec,
    campaign_config_from_json,
    environment_from_json,
    plot_trace,
    simulate_campaign,
    trace_from_json,
    trace_to_json,
    write_trace_csv,
    write_trace_json,
)

EXIT_INPUT = 2
EXIT_UPSTREAM = 3


def _fail(message: str, code: int = EXIT_INPUT) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _read_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        _fail(f"file not found: {path}")
    except json.JSONDecodeError as exc:
        _fail(f"{path} is not valid JSON: {exc}")


@click.group()
def main() -> None:
    """Traffic allocation engine for recommender experiments."""


# ---------------------------------------------------------------------------
# serve
# ---------------------------------------------------------------------------


@main.command()
@click.option("--config", "config_path", default=None, help="JSON config file.")
@click.option("--port", type=int, default=None, help="Override the listen port.")
@click.option("--data-dir", default=None, help="Override the storage directory.")
def serve(config_path: str | None, port: int | None, data_dir: str | None) -> None:
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app, load_config

    try:
        config = load_config(config_path)
        if port is not None:
            config.port = port
        if data_dir is not None:
            config.data_dir = data_dir
        app = create_app(config)
    except BanditError as exc:
        _fail(str(exc))
    uvicorn.run(app, host="127.0.0.1", port=config.port, log_level="warning")


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def _run_seed(args: tuple) -> tuple[int, dict]:
    env, config, n_epochs, out_dir, svg = args
    trace = simulate_campaign(env, config, n_epochs)
    out_dir = Path(out_dir)
    write_trace_csv(trace, out_dir / f"trace-seed{env.seed}.csv")
    write_trace_json(trace, out_dir / f"trace-seed{env.seed}.json")
    if svg:
        plot_trace(trace, out_dir / f"allocation-seed{env.seed}.svg")
    return env.seed, trace_to_json(trace)


@main.command()
@click.option("--spec", "spec_path", required=True, help="Environment/campaign JSON spec.")
@click.option("--epochs", default=14, show_default=True, help="Epochs per run.")
@click.option("--seeds", default=1, show_default=True, help="Number of seeded runs.")
@click.option("--seed", "base_seed", type=int, default=None, help="Override the spec's base seed.")
@click.option("--out", "out_dir", required=True, help="Output directory.")
@click.option("--jobs", type=int, default=1, show_default=True, help="Parallel workers.")
def simulate(spec_path, epochs, seeds, base_seed, out_dir, jobs) -> None:
    """Run seeded synthetic campaigns; write traces, an SVG timeseries
    for the first seed, and an aggregate summary."""
    obj = _read_json(spec_path)
    try:
        if "environment" not in obj:
            _fail(f"{spec_path} must contain an 'environment' object")
        env = environment_from_json(obj["environment"])
        config = (
            campaign_config_from_json(obj["campaign"])
            if "campaign" in obj
            else CampaignConfig()
        )
        if epochs < 1 or seeds < 1 or jobs < 1:
            _fail("--epochs, --seeds and --jobs must be positive")
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        start = base_seed if base_seed is not None else env.seed
        jobs_args = [
            (
                EnvironmentSpec(
                    arms=env.arms,
                    visitors_per_epoch=env.visitors_per_epoch,
                    seasonality=env.seasonality,
                    drift=env.drift,
                    bot_fraction=env.bot_fraction,
                    bot_behavior=env.bot_behavior,
                    click_delay=env.click_delay,
                    repeat_views=env.repeat_views,
                    seed=start + i,
                ),
                config,
                epochs,
                str(out),
                i == 0,
            )
            for i in range(seeds)
        ]
        if jobs > 1 and seeds > 1:
            with ProcessPoolExecutor(max_workers=min(jobs, seeds)) as pool:
                results = list(pool.map(_run_seed, jobs_args))
        else:
            results = [_run_seed(a) for a in jobs_args]
    except BanditError as exc:
        _fail(str(exc))

    summary = {
        "spec": str(spec_path),
        "epochs": epochs,
        "seeds": [s for s, _ in results],
        "final_weights": {str(s): t["final_weights"] for s, t in results},
        "regret_cum": {str(s): t["records"][-1]["regret_cum"] for s, t in results},
        "out_dir": str(out_dir),
    }
    (Path(out_dir) / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    click.echo(json.dumps(summary))


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------


@main.command("eval")
@click.option("--recs", "recs_path", required=True, help="Ranked lists (JSONL or CSV).")
@click.option("--truth", "truth_path", required=True, help="Relevance pairs (JSONL or CSV).")
@click.option("--k", default=10, show_default=True, help="Ranking cutoff.")
@click.option("--kind", default="click", show_default=True, help="Interaction kind label.")
@click.option("--model", default="model", show_default=True, help="Model name for the report.")
@click.option("--out", "out_path", default=None, help="Also write the report here.")
def eval_command(recs_path, truth_path, k, kind, model, out_path) -> None:
    """Score ranked lists against binary relevance."""
    try:
        lists = load_ranked_lists(Path(recs_path))
        truth = load_interactions(Path(truth_path), kind=kind)
        users = {rl.user_id for rl in lists}
        if truth.users and not (users & truth.users):
            _fail("no overlap between recommendation users and truth users")
        report = evaluate(lists, truth, k=k, model=model)
    except FileNotFoundError as exc:
        _fail(f"file not found: {exc.filename}")
    except BanditError as exc:
        _fail(str(exc))
    text = json.dumps(report, indent=2)
    if out_path:
        Path(out_path).write_text(text + "\n")
    click.echo(text)


# ---------------------------------------------------------------------------
# batch
# ---------------------------------------------------------------------------


@main.command()
@click.option("--campaign", "campaign_id", required=True, help="Campaign id.")
@click.option("--url", default="http://127.0.0.1:8000", show_default=True, help="Service base URL.")
@click.option("--token", default=None, help="API token, if the service requires one.")
def batch(campaign_id, url, token) -> None:
    """Trigger a mini-batch on a running service."""
    import httpx

    headers = {"x-api-token": token} if token else {}
    try:
        resp = httpx.post(
            f"{url.rstrip('/')}/campaigns/{campaign_id}/batch",
            headers=headers,
            timeout=30.0,
        )
    except httpx.HTTPError as exc:
        _fail(f"service unreachable at {url}: {exc}", EXIT_UPSTREAM)
    if resp.status_code != 200:
        _fail(f"batch failed ({resp.status_code}): {resp.text}")
    body = resp.json()
    if not body.get("changed", True):
        click.echo("allocation unchanged", err=True)
    click.echo(json.dumps(body))


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------


@main.command()
@click.option("--trace", "trace_path", required=True, help="Trace JSON from simulate.")
@click.option("--csv", "csv_path", default=None, help="Write the trace as CSV.")
@click.option("--svg", "svg_path", default=None, help="Render the allocation timeseries.")
def export(trace_path, csv_path, svg_path) -> None:
    """Convert a stored trace to CSV and/or an SVG chart."""
    if not csv_path and not svg_path:
        _fail("nothing to do: pass --csv and/or --svg")
    try:
        trace = trace_from_json(_read_json(trace_path))
        if csv_path:
            write_trace_csv(trace, csv_path)
        if svg_path:
            plot_trace(trace, svg_path)
    except BanditError as exc:
        _fail(str(exc))
    click.echo(json.dumps({"csv": csv_path, "svg": svg_path}))


if __name__ == "__main__":
    main()
