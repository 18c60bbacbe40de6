"""Operator CLI: corpus generation, training, evaluation, scanning, serving.

stdout carries only machine-readable payloads; everything else goes to
stderr. Exit codes: 0 success (scan: no findings), 1 scan found issues,
2 any failure.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click

from . import corpus as corpus_mod
from . import pipeline
from .detector import WindowSpec, scan_tree
from .embedding import SkipGramConfig, load_embeddings, save_embeddings
from .nn import TrainingConfig, evaluate, load_model, save_model
from .service import load_config, serve
from .service.config import AppConfig
from .service.jobs import load_assets
from .vulntypes import VulnType

TYPE_NAMES = [v.value for v in VulnType]


def fail_with_code_2(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.exceptions.Exit:
            raise
        except Exception as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
    return wrapper


@click.group()
def main() -> None:
    """ML-driven vulnerability scanner for Python source code."""


@main.command("gen-corpus")
@click.option("--type", "type_name", type=click.Choice(TYPE_NAMES),
              required=True)
@click.option("--n", type=int, default=200, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@fail_with_code_2
def gen_corpus(type_name: str, n: int, seed: int, out: str) -> None:
    """Generate a balanced synthetic labeled corpus as JSONL."""
    samples = corpus_mod.generate(VulnType(type_name), n, seed)
    corpus_mod.save_jsonl(samples, out)
    click.echo(json.dumps({"written": len(samples), "path": out}))


@main.command("train-embeddings")
@click.option("--data", type=click.Path(exists=True, dir_okay=False),
              required=True, help="JSONL corpus")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--dim", type=int, default=50, show_default=True)
@click.option("--window-radius", type=int, default=5, show_default=True)
@click.option("--negatives", type=int, default=5, show_default=True)
@click.option("--epochs", type=int, default=5, show_default=True)
@click.option("--min-count", type=int, default=2, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@fail_with_code_2
def train_embeddings_cmd(data: str, out: str, dim: int, window_radius: int,
                         negatives: int, epochs: int, min_count: int,
                         seed: int) -> None:
    """Train skip-gram embeddings over a labeled corpus."""
    samples = corpus_mod.load_jsonl(data)
    config = SkipGramConfig(dim=dim, window_radius=window_radius,
                            negatives=negatives, epochs=epochs,
                            min_count=min_count, seed=seed)
    model = pipeline.train_embeddings(samples, config)
    save_embeddings(model, out, config)
    click.echo(json.dumps({"vocab": len(model.vocab), "dim": model.dim,
                           "path": out}))


@main.command("train-model")
@click.option("--type", "type_name", type=click.Choice(TYPE_NAMES),
              required=True)
@click.option("--data", type=click.Path(exists=True, dir_okay=False),
              required=True, help="JSONL corpus")
@click.option("--emb", type=click.Path(exists=True, dir_okay=False),
              required=True, help="embedding model file")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--learning-rate", type=float, default=0.001, show_default=True)
@click.option("--epochs", type=int, default=50, show_default=True)
@click.option("--batch-size", type=int, default=128, show_default=True)
@click.option("--dropout-rate", type=float, default=0.2, show_default=True)
@click.option("--hidden-layers", type=int, default=3, show_default=True)
@click.option("--hidden-units", type=int, default=50, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@fail_with_code_2
def train_model(type_name: str, data: str, emb: str, out: str,
                learning_rate: float, epochs: int, batch_size: int,
                dropout_rate: float, hidden_layers: int, hidden_units: int,
                seed: int) -> None:
    """Train one per-type classifier on a labeled corpus."""
    vuln_type = VulnType(type_name)
    samples = [s for s in corpus_mod.load_jsonl(data)
               if s.vuln_type is vuln_type]
    if not samples:
        raise click.ClickException(f"no {type_name} samples in {data}")
    emb_model = load_embeddings(emb)
    config = TrainingConfig(learning_rate=learning_rate, epochs=epochs,
                            batch_size=batch_size, dropout_rate=dropout_rate,
                            hidden_layers=hidden_layers,
                            hidden_units=hidden_units, seed=seed)
    model, losses = pipeline.train_detector(vuln_type, samples, emb_model,
                                            config)
    save_model(model, out)
    click.echo(json.dumps({"path": out, "epochs": len(losses),
                           "first_epoch_loss": losses[0],
                           "final_epoch_loss": losses[-1]}))


@main.command("eval")
@click.option("--model", "model_path",
              type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--emb", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--data", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--threshold", type=float, default=0.5, show_default=True)
@fail_with_code_2
def eval_cmd(model_path: str, emb: str, data: str, threshold: float) -> None:
    """Evaluate a classifier on a labeled corpus; prints metrics JSON."""
    model = load_model(model_path)
    emb_model = load_embeddings(emb)
    samples = corpus_mod.load_jsonl(data)
    if model.vuln_type is not None:
        samples = [s for s in samples if s.vuln_type is model.vuln_type]
    dataset = pipeline.build_dataset(samples, emb_model)
    metrics = evaluate(model, dataset, threshold)
    click.echo(json.dumps(metrics.to_dict()))


@main.command("scan")
@click.argument("path", type=click.Path(exists=True))
@click.option("--models", "models_dir",
              type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--emb", type=click.Path(exists=True, dir_okay=False),
              default=None, help="defaults to <models>/embeddings.json")
@click.option("--types", default="", help="comma-separated subset to scan")
@click.option("--window-length", type=int, default=40, show_default=True)
@click.option("--window-stride", type=int, default=5, show_default=True)
@click.option("--threshold", type=float, default=0.5, show_default=True)
@fail_with_code_2
def scan(path: str, models_dir: str, emb: str | None, types: str,
         window_length: int, window_stride: int, threshold: float) -> None:
    """Scan a file or directory; prints the report JSON to stdout.

    Exit code 0 when no findings, 1 when findings exist, 2 on error.
    """
    assets = load_assets(models_dir)
    if emb:
        assets.embeddings = load_embeddings(emb)
    if assets.embeddings is None:
        raise click.ClickException(
            f"no embeddings at {models_dir}/embeddings.json (use --emb)")
    if not assets.models:
        raise click.ClickException(f"no classifier models in {models_dir}")
    wanted = None
    if types:
        wanted = [VulnType(t.strip()) for t in types.split(",") if t.strip()]
    root = Path(path)
    if root.is_dir():
        files = [(str(p.relative_to(root)), p.read_bytes())
                 for p in sorted(root.rglob("*")) if p.is_file()]
    else:
        files = [(root.name, root.read_bytes())]
    spec = WindowSpec(length=window_length, stride=window_stride,
                      threshold=threshold)
    result = scan_tree(assets.models, assets.embeddings, files, spec, wanted)
    click.echo(json.dumps(result.to_dict(), indent=2))
    sys.exit(1 if result.findings else 0)


@main.command("serve")
@click.option("--config", "config_path",
              type=click.Path(exists=True, dir_okay=False), default=None)
@fail_with_code_2
def serve_cmd(config_path: str | None) -> None:
    """Run the scan service."""
    config = load_config(config_path) if config_path else AppConfig()
    click.echo(f"listening on {config.listen}", err=True)
    serve(config)


if __name__ == "__main__":
    main()
