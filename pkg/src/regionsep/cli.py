"""Command-line entry points for the query-by-region separation pipeline."""

import json
import os
import sys

import click
import numpy as np

from .dataset import DatasetConfig, generate_synthetic_tracks, write_manifest
from .loss import LossConfig
from .pipeline import (SpecStore, evaluate_multi_source, evaluate_single_source,
                       load_rows, make_sampler, precompute_manifest, save_rows,
                       write_multi_source_report, write_single_source_report)
from .precompute import ALPHA_GRID, PrecomputeConfig, validation_query
from .separator import (ModelConfig, SeparatorModel, TrainConfig, load_checkpoint,
                        oracle_separate, save_checkpoint, train)
from .signal import StftConfig, write_wav


def _load_config(path):
    if not path:
        return {}
    with open(path) as f:
        return json.load(f)


def _fail(message, hint):
    click.echo(f"error: {message}", err=True)
    click.echo(f"hint: {hint}", err=True)
    sys.exit(1)


def _open_store(manifest):
    try:
        return SpecStore(manifest)
    except FileNotFoundError as exc:
        _fail(str(exc), "run `regionsep gen-data` and `regionsep precompute` first")


@click.group()
def main():
    """Query-by-region music source separation toolkit."""


@main.command("gen-data")
@click.option("--out", "--manifest", "out", required=True, type=click.Path())
@click.option("--seed", default=0, type=int)
@click.option("--config", default=None, type=click.Path(exists=True))
@click.option("--tracks", default=None, type=int)
@click.option("--duration", default=None, type=float)
@click.option("--sample-rate", default=None, type=int)
@click.option("--channels", default=None, type=int)
def gen_data(out, seed, config, tracks, duration, sample_rate, channels):
    """Generate the synthetic multi-stem corpus and write its manifest."""
    cfg_kwargs = _load_config(config).get("dataset", {})
    for key, val in (("num_tracks", tracks), ("duration", duration),
                     ("sample_rate", sample_rate), ("num_channels", channels)):
        if val is not None:
            cfg_kwargs[key] = val
    cfg = DatasetConfig(**cfg_kwargs)
    track_list = generate_synthetic_tracks(cfg, seed)
    write_manifest(out, track_list, seed)
    click.echo(f"wrote {len(track_list)} tracks to {out}")


@main.command()
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--seed", default=0, type=int)
@click.option("--config", default=None, type=click.Path(exists=True))
@click.option("--pca-dim", default=8, type=int)
@click.option("--gate-db", default=-48.0, type=float)
@click.option("--max-subset-card", default=10, type=int)
@click.option("--quiet", is_flag=True)
def precompute(manifest, seed, config, pca_dim, gate_db, max_subset_card, quiet):
    """Embed clip stems, fit PCA, and precompute valid query specs."""
    pcfg_kwargs = _load_config(config).get("precompute", {})
    pcfg_kwargs.setdefault("level_gate_db", gate_db)
    pcfg_kwargs.setdefault("max_subset_card", max_subset_card)
    pcfg = PrecomputeConfig(**pcfg_kwargs)
    progress = None if quiet else (lambda msg: click.echo(msg))
    total = precompute_manifest(manifest, pcfg, pca_dim, progress=progress)
    click.echo(f"precomputed {total} query specs")


@main.command("train")
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--seed", default=0, type=int)
@click.option("--config", default=None, type=click.Path(exists=True))
@click.option("--epochs", default=10, type=int)
@click.option("--batches-per-epoch", default=256, type=int)
@click.option("--batch-size", default=4, type=int)
@click.option("--lr", default=1e-3, type=float)
@click.option("--dtype", default="float32",
              type=click.Choice(["float32", "float64"]))
@click.option("--loss-trace", default=None, type=click.Path())
def train_cmd(manifest, out, seed, config, epochs, batches_per_epoch,
              batch_size, lr, dtype, loss_trace):
    """Train the toy band-split separator on the precomputed queries."""
    store = _open_store(manifest)
    file_cfg = _load_config(config)
    tcfg = TrainConfig(lr=lr, epochs=epochs, batches_per_epoch=batches_per_epoch,
                       batch_size=batch_size, seed=seed, dtype=dtype,
                       **file_cfg.get("train", {}))
    lcfg = LossConfig(**file_cfg.get("loss", {}))
    header = store.manifest.header
    mcfg = ModelConfig(
        num_channels=store.clip_stems(next(store.iter_specs()).clip_id)[1][0].num_channels,
        feat_dim=store.pca.out_dim, query_dim=store.pca.out_dim,
    )
    model = SeparatorModel(mcfg, seed=seed)
    sampler = make_sampler(store)
    history = train(model, sampler, lcfg, tcfg, log_every=32)
    save_checkpoint(out, model)
    if loss_trace:
        with open(loss_trace, "w") as f:
            for v in history["loss"]:
                f.write(f"{v!r}\n")
    click.echo(f"trained {tcfg.epochs} epochs; final loss "
               f"{history['loss'][-1]:.3f}; checkpoint at {out}")


@main.command()
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--mode", type=click.Choice(["single-source", "multi-source"]),
              default="multi-source")
@click.option("--model", "model_path", default=None, type=click.Path(exists=True),
              help="Separator checkpoint; omitted = oracle separator.")
@click.option("--split", default="test")
@click.option("--seed", default=0, type=int)
@click.option("--alpha-grid", default=None,
              help="Comma-separated alpha values for single-source mode.")
@click.option("--threshold", default=0.5, type=float)
@click.option("--out", required=True, type=click.Path())
def evaluate(manifest, mode, model_path, split, seed, alpha_grid, threshold, out):
    """Evaluate the oracle or a trained model on precomputed queries."""
    store = _open_store(manifest)
    model = load_checkpoint(model_path) if model_path else None
    run_mode = "model" if model else "oracle"
    os.makedirs(out, exist_ok=True)
    if mode == "multi-source":
        overall, grouped, rows = evaluate_multi_source(
            store, run_mode, model, split, threshold,
            progress=lambda m: click.echo(m))
        save_rows(os.path.join(out, "multi_source_rows.jsonl"), rows)
        write_multi_source_report(out, rows, threshold)
        click.echo(f"macro AP {overall.macro.get('ap'):.4f}  "
                   f"weighted mAP {overall.weighted.get('ap'):.4f}  "
                   f"queries {len(rows)}")
    else:
        grid = (tuple(float(a) for a in alpha_grid.split(","))
                if alpha_grid else ALPHA_GRID)
        per_alpha, best_rows = evaluate_single_source(
            store, run_mode, model, split, grid, threshold,
            progress=lambda m: click.echo(m))
        save_rows(os.path.join(out, "single_source_best.jsonl"), best_rows)
        save_rows(os.path.join(out, "single_source_rows.jsonl"),
                  [row for rows in per_alpha.values() for row in rows])
        write_single_source_report(out, per_alpha, best_rows)
        med = float(np.median([r["snr_db"] for r in best_rows]))
        click.echo(f"median best-alpha SNR {med:.2f} dB over {len(best_rows)} specs")


@main.command("oracle-separate")
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--clip-id", required=True)
@click.option("--query-index", default=0, type=int)
@click.option("--t", default=0.5, type=float)
@click.option("--seed", default=0, type=int)
@click.option("--out", required=True, type=click.Path())
def oracle_separate_cmd(manifest, clip_id, query_index, t, seed, out):
    """Render the ground-truth extraction for one precomputed query."""
    store = _open_store(manifest)
    track_id = clip_id.split(":")[0]
    specs = [s for s in store.specs(track_id) if s.clip_id == clip_id]
    if not (0 <= query_index < len(specs)):
        _fail(f"clip {clip_id} has {len(specs)} queries",
              "list queries via the service or pick a smaller --query-index")
    spec = specs[query_index]
    query = spec.interpolated(t)
    _track, chunks = store.clip_stems(clip_id)
    active = sorted(spec.target_indices | spec.non_target_indices)
    emb = np.array([store.projected_embedding(clip_id, i) for i in active])
    est = oracle_separate([chunks[i] for i in active], emb, query)
    write_wav(out, est)
    click.echo(f"wrote {out}")


@main.command()
@click.option("--scores", required=True, type=click.Path(exists=True),
              help="Raw multi-source rows (multi_source_rows.jsonl).")
@click.option("--threshold", default=0.5, type=float)
@click.option("--seed", default=0, type=int)
@click.option("--out", required=True, type=click.Path())
def report(scores, threshold, seed, out):
    """Regenerate CSV reports from stored raw scores."""
    rows = load_rows(scores)
    overall, _grouped = write_multi_source_report(out, rows, threshold)
    click.echo(f"macro AP {overall.macro.get('ap'):.4f}; reports in {out}")


@main.command()
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--model", "model_path", default=None, type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8765, type=int)
@click.option("--seed", default=0, type=int)
def serve(manifest, model_path, host, port, seed):
    """Run the HTTP service backing the query studio UI."""
    import uvicorn

    from .service import create_app
    app = create_app(manifest, model_path)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
