"""Command-line entry point.

One binary drives the whole pipeline: import a flow, compile it to training
dialogs, train the policy, chat with it, serve the teaching API and UI,
replay transcripts against two model versions, export the training set back
to a flow, and verify gradients. Configuration precedence is flags, then
DLGF_* environment variables, then an optional JSON config file.
"""

from __future__ import annotations

import hashlib
import json
import sys
import uuid
from pathlib import Path

import click

from .compiler import (
    aggregate_to_flow,
    derive_action_masks,
    derive_templates,
    enumerate_walks,
    walks_to_training_dialogs,
)
from .engine import Hyperparams
from .errors import DlgflowError
from .flow import parse_flow, serialize_flow, validate_flow
from .store import DataStore
from .teaching import RegressionRun, TeachingService


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    return json.loads(Path(path).read_text(encoding="utf-8"))


@click.group()
@click.option("--data-dir", envvar="DLGF_DATA_DIR", default="data",
              show_default=True, help="Directory holding all pipeline state.")
@click.option("--seed", envvar="DLGF_SEED", default=0, show_default=True,
              type=int, help="Seed for every stochastic step.")
@click.option("--config", envvar="DLGF_CONFIG", default=None,
              type=click.Path(exists=True), help="JSON config file.")
@click.pass_context
def cli(ctx, data_dir, seed, config):
    defaults = _load_config(config)
    if defaults:
        # config is the weakest layer: flags and env vars win
        ctx.default_map = defaults
        source = ctx.get_parameter_source
        if source("data_dir") == click.core.ParameterSource.DEFAULT:
            data_dir = defaults.get("data_dir", data_dir)
        if source("seed") == click.core.ParameterSource.DEFAULT:
            seed = defaults.get("seed", seed)
    ctx.obj = {"data_dir": Path(data_dir), "seed": int(seed)}


def _store(ctx) -> DataStore:
    return DataStore(ctx.obj["data_dir"])


@cli.command("import")
@click.argument("flow_file", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def import_flow(ctx, flow_file):
    """Parse, validate, and store a dialog-flow document."""
    flow = parse_flow(Path(flow_file).read_bytes())
    issues = validate_flow(flow)
    errors = [i for i in issues if i.severity == "error"]
    for issue in issues:
        stream = sys.stderr if issue.severity == "error" else sys.stdout
        click.echo(f"{issue.severity}: {issue.code} at {issue.location}: "
                   f"{issue.message}", file=stream)
    if errors:
        raise DlgflowError(f"flow failed validation with {len(errors)} error(s)")
    _store(ctx).save_flow(flow)
    click.echo(f"imported {flow.name}: {len(flow.nodes)} nodes, "
               f"{len(flow.edges)} edges")


@cli.command()
@click.option("--max-cycle-visits", default=1, show_default=True, type=int)
@click.option("--max-walks", default=5000, show_default=True, type=int)
@click.option("--synonyms-per-option", default=0, show_default=True, type=int)
@click.pass_context
def compile(ctx, max_cycle_visits, max_walks, synonyms_per_option):
    """Enumerate walks and write training dialogs plus the action catalog."""
    store = _store(ctx)
    flow = store.load_flow()
    walks = enumerate_walks(flow, max_cycle_visits=max_cycle_visits,
                            max_walks=max_walks)
    templates, node_to_template = derive_templates(flow)
    masks = derive_action_masks(flow, templates, node_to_template)
    dialogs = walks_to_training_dialogs(flow, walks, synonyms_per_option,
                                        templates, node_to_template)
    store.dialogs_path.unlink(missing_ok=True)
    for dialog in dialogs:
        store.append_dialog(dialog)
    store.save_catalog(templates, masks)
    click.echo(f"{len(walks)} walks, {len(dialogs)} dialogs, "
               f"{len(templates)} templates, {len(masks)} masks")


def _hyper_options(fn):
    for option in reversed([
        click.option("--hidden-size", default=128, show_default=True, type=int),
        click.option("--embedding-dim", default=32, show_default=True, type=int),
        click.option("--learning-rate", default=0.01, show_default=True, type=float),
        click.option("--max-epochs", default=500, show_default=True, type=int),
        click.option("--clip-norm", default=5.0, show_default=True, type=float),
    ]):
        fn = option(fn)
    return fn


@cli.command()
@_hyper_options
@click.pass_context
def train(ctx, hidden_size, embedding_dim, learning_rate, max_epochs, clip_norm):
    """Train the policy on the stored training dialogs."""
    from .report import render_training_curve

    hyper = Hyperparams(embedding_dim=embedding_dim, hidden_size=hidden_size,
                        learning_rate=learning_rate, max_epochs=max_epochs,
                        clip_norm=clip_norm, seed=ctx.obj["seed"])
    service = TeachingService(_store(ctx), hyper=hyper)
    version, metrics = service.retrain()
    blob = service.registry.load_blob(version)
    digest = hashlib.sha256(blob).hexdigest()
    click.echo(f"version {version}: loss {metrics['final_loss']:.4f}, "
               f"accuracy {metrics['per_turn_accuracy']:.4f}, "
               f"epochs {metrics['epochs']}")
    click.echo(f"model sha256 {digest}")
    curve = service.store.root / "models" / f"v{version}_loss.png"
    render_training_curve(metrics["loss_history"], curve)
    click.echo(f"wrote {curve}")


@cli.command()
@click.option("--conversation-id", default=None,
              help="Resume or name the logged conversation.")
@click.pass_context
def chat(ctx, conversation_id):
    """Interactive turn loop against the active model (logged for teaching)."""
    service = TeachingService(_store(ctx))
    conversation_id = conversation_id or f"cli-{uuid.uuid4().hex[:8]}"
    result = service.chat(conversation_id, "")
    for action in result["actions"]:
        click.echo(f"bot> {action['text']}")
    while True:
        try:
            text = click.prompt("you", prompt_suffix="> ", default="",
                                show_default=False)
        except (EOFError, click.Abort):
            break
        if not text or text in (":q", "exit", "quit"):
            break
        result = service.chat(conversation_id, text)
        for action in result["actions"]:
            click.echo(f"bot> {action['text']}")
        if result["state_summary"]["done"]:
            click.echo("(dialog complete)")
            break
    click.echo(f"logged as dialog {result['log_id']}")


@cli.command()
@click.option("--port", default=8321, show_default=True, type=int)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--ui-dir", default="frontend/dist", show_default=True,
              help="Static assets for the teaching UI.")
@click.pass_context
def serve(ctx, port, host, ui_dir):
    """Run the teaching HTTP service (and the UI, when assets exist)."""
    import uvicorn

    from .service import create_app

    if not 1024 <= port <= 65535:
        raise DlgflowError(f"port {port} outside 1024..65535")
    service = TeachingService(_store(ctx))
    app = create_app(service, static_dir=Path(ui_dir))
    click.echo(f"serving on http://{host}:{port}")
    uvicorn.run(app, host=host, port=port, log_level="warning")


@cli.command()
@click.option("--left", required=True, help="Left model version, e.g. v1.")
@click.option("--right", required=True, help="Right model version, e.g. v2.")
@click.option("--transcripts", "transcripts_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="JSON Lines transcript file.")
@click.option("--candidate", type=click.Choice(["left", "right"]),
              default="right", show_default=True)
@click.option("--out", "out_dir", default=None,
              help="Report directory (default: <data-dir>/reports/<run>).")
@click.pass_context
def replay(ctx, left, right, transcripts_path, candidate, out_dir):
    """Replay transcripts against two model versions and report divergences."""
    from .regression import parse_transcripts
    from .report import render_report_figure, write_pairs_csv, write_report_json

    store = _store(ctx)
    service = TeachingService(store)
    transcripts = parse_transcripts(Path(transcripts_path).read_bytes())
    if not transcripts:
        from .errors import TranscriptMismatchError

        raise TranscriptMismatchError(f"no transcripts in {transcripts_path}")
    left_version = int(left.lstrip("v"))
    right_version = int(right.lstrip("v"))
    result = service.start_regression_run(left_version, right_version,
                                          transcripts,
                                          candidate_side=candidate,
                                          seed=ctx.obj["seed"])
    run = RegressionRun(store, run_id=result["run_id"])
    report = run.report()
    pairs = run.load_pairs()

    out = Path(out_dir) if out_dir else store.root / "reports" / result["run_id"]
    out.mkdir(parents=True, exist_ok=True)
    write_pairs_csv(pairs, out / "pairs.csv")
    write_report_json(report, out / "report.json",
                      extra={"run_id": result["run_id"],
                             "left_version": left_version,
                             "right_version": right_version,
                             "auto_same": result["auto_same"],
                             "needing_rating": result["needing_rating"]})
    divergences = [p["divergence"] for p in pairs if p["divergence"] is not None]
    render_report_figure(report, out / "report.png", divergence_turns=divergences)

    click.echo(f"run {result['run_id']}: {result['pairs']} pairs, "
               f"{result['auto_same']} auto-same, "
               f"{result['needing_rating']} need rating")
    click.echo(f"wrote {out / 'pairs.csv'}")
    click.echo(f"wrote {out / 'report.json'}")
    click.echo(f"wrote {out / 'report.png'}")


@cli.command("export-flow")
@click.option("--out", "out_path", default=None, type=click.Path())
@click.option("--name", default="aggregated", show_default=True)
@click.pass_context
def export_flow(ctx, out_path, name):
    """Aggregate the training dialogs back into a flow document."""
    store = _store(ctx)
    dialogs = store.load_dialogs()
    templates, _ = store.load_catalog()
    flow = aggregate_to_flow(dialogs, templates, store.load_entities(), name=name)
    payload = serialize_flow(flow)
    if out_path:
        Path(out_path).write_bytes(payload)
        click.echo(f"wrote {out_path}: {len(flow.nodes)} nodes, "
                   f"{len(flow.edges)} edges")
    else:
        sys.stdout.write(payload.decode("utf-8"))


@cli.command()
@click.option("--seeds", default=20, show_default=True, type=int)
@click.option("--tolerance", default=1e-4, show_default=True, type=float)
@click.pass_context
def gradcheck(ctx, seeds, tolerance):
    """Verify analytic gradients against central finite differences."""
    from .engine import gradient_check

    worst = 0.0
    for seed in range(seeds):
        worst = max(worst, gradient_check(seed=seed))
    click.echo(f"max relative error {worst:.3e} over {seeds} seeds")
    if worst >= tolerance:
        raise DlgflowError(f"gradient check failed: {worst:.3e} >= {tolerance:g}")


def main() -> int:
    try:
        cli(standalone_mode=False)
    except click.exceptions.Abort:
        return 1
    except click.ClickException as exc:
        exc.show()
        return 2
    except DlgflowError as exc:
        click.echo(f"error: {exc.code}: {exc}", err=True)
        return 1
    except FileNotFoundError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
