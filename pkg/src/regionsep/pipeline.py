"""Orchestration over a manifest directory: embedding + PCA + query-spec
precompute, the training sampler, and the evaluation protocols."""

import json
import os

import numpy as np

from .dataset import ClipIndex, Manifest, clip_audio, mix
from .embedding import (EmbeddingSet, export_embeddings, fit_pca, import_embeddings,
                        load_pca, mock_embed, project, save_pca)
from .precompute import (ALPHA_GRID, PrecomputeConfig, available_sources,
                         load_query_specs, precompute_clip, sample_training_query,
                         save_query_specs, single_source_query, validation_query)
from .retrieval import compute_metrics, group_analysis, score_separation
from .separator import make_training_pair, oracle_separate, separate
from .signal import snr

EMBEDDINGS_FILE = "embeddings.jsonl"
PCA_FILE = "pca.json"
QUERY_DIR = "queries"
DEFAULT_PCA_DIM = 8


def _embedding_id(clip_id, stem_idx):
    return f"{clip_id}|{stem_idx}"


def precompute_manifest(root, cfg: PrecomputeConfig = PrecomputeConfig(),
                        pca_dim: int = DEFAULT_PCA_DIM, window=10.0, stride=1.0,
                        progress=None):
    """Embed every available clip stem, fit PCA on the training split, and
    write per-track query-spec files.

    Produces embeddings.jsonl, pca.json, and queries/<track>.qspec."""
    manifest = Manifest(root)
    records = []  # (embedding id, raw vector)
    train_rows = []
    per_clip = {}  # clip_id -> (track_id, available indices, raw vectors by index)
    for track_id in manifest.track_ids():
        track = manifest.load_track(track_id)
        split = manifest.track_entries[track_id]["split"]
        for clip in manifest.clips(track_id, window, stride):
            chunks = [clip_audio(s, clip) for s in track.stems]
            avail = sorted(available_sources(chunks, cfg.level_gate_db))
            vecs = {}
            for idx in avail:
                v = mock_embed(chunks[idx])
                vecs[idx] = v
                records.append((_embedding_id(clip.clip_id, idx), v))
                if split == "train":
                    train_rows.append(v)
            per_clip[clip.clip_id] = (track_id, avail, vecs)
        if progress:
            progress(f"embedded {track_id}")
    if len(train_rows) < pca_dim + 1:
        raise ValueError("not enough training embeddings to fit PCA")
    export_embeddings(os.path.join(root, EMBEDDINGS_FILE), records)
    pca = fit_pca(
        EmbeddingSet(vectors=np.array(train_rows),
                     source_ids=list(range(len(train_rows))),
                     space_dim=train_rows[0].shape[0]),
        pca_dim,
    )
    save_pca(os.path.join(root, PCA_FILE), pca)

    qdir = os.path.join(root, QUERY_DIR)
    os.makedirs(qdir, exist_ok=True)
    total = 0
    for track_id in manifest.track_ids():
        track = manifest.load_track(track_id)
        specs = []
        for clip in manifest.clips(track_id, window, stride):
            _tid, avail, vecs = per_clip[clip.clip_id]
            chunks = [clip_audio(s, clip) for s in track.stems]
            emb = np.zeros((len(track.stems), pca_dim))
            for idx in avail:
                emb[idx] = project(pca, vecs[idx])
            specs.extend(precompute_clip(clip.clip_id, chunks, emb, cfg))
        save_query_specs(os.path.join(qdir, track_id + ".qspec"), specs)
        total += len(specs)
        if progress:
            progress(f"precomputed {track_id}: {len(specs)} specs")
    return total


class SpecStore:
    """Loads per-track query specs and clip embeddings for evaluation/training."""

    def __init__(self, root):
        self.root = root
        self.manifest = Manifest(root)
        self.pca = load_pca(os.path.join(root, PCA_FILE))
        emb = import_embeddings(os.path.join(root, EMBEDDINGS_FILE))
        self.raw = dict(zip(emb.source_ids, emb.vectors))
        self._specs = {}
        self._tracks = {}

    def specs(self, track_id):
        if track_id not in self._specs:
            path = os.path.join(self.root, QUERY_DIR, track_id + ".qspec")
            self._specs[track_id] = load_query_specs(path)
        return self._specs[track_id]

    def projected_embedding(self, clip_id, stem_idx):
        return project(self.pca, self.raw[_embedding_id(clip_id, stem_idx)])

    def clip_stems(self, clip_id):
        # tracks cached in memory: the training sampler hits the same few
        # tracks thousands of times and WAV decode dominates otherwise
        track_id = clip_id.split(":")[0]
        if track_id not in self._tracks:
            self._tracks[track_id] = self.manifest.load_track(track_id)
        track = self._tracks[track_id]
        start = float(clip_id.split(":")[1])
        clip = ClipIndex(clip_id=clip_id, track_id=track_id, start=start)
        return track, [clip_audio(s, clip) for s in track.stems]

    def iter_specs(self, split=None):
        for track_id in self.manifest.track_ids(split):
            for spec in self.specs(track_id):
                yield spec


def make_sampler(store: SpecStore, split="train", gain_jitter_db=6.0):
    """Training sampler: random spec, uniform radii, shared-augmentation pair.

    Specs whose non-target set is empty are skipped: their target equals the
    mixture, so they carry no separation signal and would dominate the
    gradient (they are the majority after elimination)."""
    specs = [s for s in store.iter_specs(split) if s.non_target_indices]
    if not specs:
        raise ValueError(f"no query specs in split '{split}'")
    slices = {}  # clip_id -> stem sample arrays; drawn thousands of times

    def sampler(rng):
        spec = specs[int(rng.integers(len(specs)))]
        if spec.clip_id not in slices:
            _track, chunks = store.clip_stems(spec.clip_id)
            slices[spec.clip_id] = {i: c.samples for i, c in enumerate(chunks)}
        stems_by_index = slices[spec.clip_id]
        query = sample_training_query(spec, rng)
        x, y = make_training_pair(spec, stems_by_index, query, rng, gain_jitter_db)
        return x, y, query

    return sampler


def _estimate(mode, model, mixture, query, chunks, embeddings):
    if mode == "oracle":
        return oracle_separate(chunks, embeddings, query)
    return separate(mixture, query, model)


def _query_rows(store, spec, query, mode, model, ridge):
    """Run one query end to end; returns the group-analysis row."""
    track, chunks = store.clip_stems(spec.clip_id)
    classes = [s.class_label for s in track.stems]
    t_idx = sorted(spec.target_indices)
    nt_idx = sorted(spec.non_target_indices)
    mixture = mix([chunks[i] for i in t_idx + nt_idx])
    target = mix([chunks[i] for i in t_idx])
    emb = np.zeros((len(chunks), spec.dim))
    for i in t_idx + nt_idx:
        emb[i] = store.projected_embedding(spec.clip_id, i)
    est = _estimate(mode, model, mixture, query, chunks, emb)
    value = snr(est, target)
    scores = score_separation(
        est, [chunks[i] for i in t_idx], [chunks[i] for i in nt_idx],
        ridge=ridge, clip_id=spec.clip_id)
    records = (
        [(classes[i], float(s), True) for i, s in zip(t_idx, scores.phi_hat)]
        + [(classes[i], float(s), False) for i, s in zip(nt_idx, scores.phi_hat_perp)]
    )
    return {
        "clip_id": spec.clip_id,
        "n_mixture": len(t_idx) + len(nt_idx),
        "n_target": len(t_idx),
        "snr_db": value,
        "records": records,
    }


def evaluate_multi_source(store: SpecStore, mode="oracle", model=None,
                          split="test", threshold=0.5, ridge=1e-8, progress=None):
    """Midpoint-query evaluation grouped by mixture and target source counts."""
    rows = []
    for spec in store.iter_specs(split):
        if not spec.non_target_indices:
            continue
        query = validation_query(spec)
        rows.append(_query_rows(store, spec, query, mode, model, ridge))
        if progress and len(rows) % 200 == 0:
            progress(f"{len(rows)} queries evaluated")
    if not rows:
        raise ValueError(f"no evaluable specs in split '{split}'")
    all_records = [r for row in rows for r in row["records"]]
    overall = compute_metrics(all_records, threshold)
    grouped = group_analysis(rows, threshold)
    return overall, grouped, rows


def evaluate_single_source(store: SpecStore, mode="oracle", model=None,
                           split="test", alpha_grid=ALPHA_GRID, threshold=0.5,
                           ridge=1e-8, progress=None):
    """Alpha-sweep evaluation of single-target specs.

    Returns (per_alpha rows, best-alpha summary rows)."""
    per_alpha = {a: [] for a in alpha_grid}
    best_rows = []
    count = 0
    for spec in store.iter_specs(split):
        if len(spec.target_indices) != 1 or not spec.non_target_indices:
            continue
        track, _ = store.clip_stems(spec.clip_id)
        label = track.stems[next(iter(spec.target_indices))].class_label
        sweep = []
        for alpha in alpha_grid:
            query = single_source_query(spec, alpha)
            row = _query_rows(store, spec, query, mode, model, ridge)
            row["alpha"] = alpha
            row["target_class"] = label
            per_alpha[alpha].append(row)
            sweep.append(row)
        best = max(sweep, key=lambda r: r["snr_db"])
        best_rows.append({"clip_id": spec.clip_id, "target_class": label,
                          "best_alpha": best["alpha"], "snr_db": best["snr_db"]})
        count += 1
        if progress and count % 50 == 0:
            progress(f"{count} single-source specs evaluated")
    if not best_rows:
        raise ValueError(f"no single-source specs in split '{split}'")
    return per_alpha, best_rows


# ---------------------------------------------------------------------------
# Raw-score persistence and CSV report generation

def save_rows(path, rows):
    with open(path, "w") as f:
        for row in rows:
            f.write(json.dumps(row, sort_keys=True) + "\n")


def load_rows(path):
    with open(path) as f:
        return [json.loads(ln) for ln in f if ln.strip()]


def write_multi_source_report(out_dir, rows, threshold=0.5):
    """Regenerate the CSV tables from stored raw rows (deterministic)."""
    os.makedirs(out_dir, exist_ok=True)
    records = [tuple(r) for row in rows for r in row["records"]]
    overall = compute_metrics(records, threshold)
    grouped = group_analysis(rows, threshold)
    with open(os.path.join(out_dir, "retrieval_by_class.csv"), "w") as f:
        f.write("class,ap,roc_auc,accuracy,precision,recall,f1,best_f1,support\n")
        for label, m in overall.per_class.items():
            f.write(",".join([label] + [
                "" if m[k] is None else f"{m[k]:.6f}"
                for k in ("ap", "roc_auc", "accuracy", "precision", "recall",
                          "f1", "best_f1")
            ] + [str(m["support"])]) + "\n")
        for name, agg in (("macro", overall.macro), ("micro", overall.micro),
                          ("weighted", overall.weighted)):
            f.write(",".join([name] + [
                "" if agg.get(k) is None else f"{agg[k]:.6f}"
                for k in ("ap", "roc_auc", "accuracy", "precision", "recall", "f1")
            ] + ["", ""]) + "\n")
    with open(os.path.join(out_dir, "grouped_cells.csv"), "w") as f:
        f.write("n_mixture,n_target,target_ratio,median_snr_db,"
                "weighted_map,unweighted_map,num_queries\n")
        for (nm, nt), cell in grouped.cells.items():
            wm = cell["weighted_map"]
            um = cell["unweighted_map"]
            f.write(f"{nm},{nt},{cell['target_ratio']:.4f},"
                    f"{cell['median_snr_db']:.4f},"
                    f"{'' if wm is None else f'{wm:.6f}'},"
                    f"{'' if um is None else f'{um:.6f}'},"
                    f"{cell['num_queries']}\n")
    return overall, grouped


def write_single_source_report(out_dir, per_alpha, best_rows):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "single_source_best_alpha.csv"), "w") as f:
        f.write("clip_id,target_class,best_alpha,snr_db\n")
        for r in best_rows:
            f.write(f"{r['clip_id']},{r['target_class']},"
                    f"{r['best_alpha']},{r['snr_db']:.4f}\n")
    with open(os.path.join(out_dir, "single_source_roc.csv"), "w") as f:
        f.write("alpha,class,score,is_target\n")
        for alpha, rows in per_alpha.items():
            for row in rows:
                for label, score, pos in row["records"]:
                    f.write(f"{alpha},{label},{score:.6f},{int(pos)}\n")
