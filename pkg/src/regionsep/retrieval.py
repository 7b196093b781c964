"""Least-squares source-presence scores and the retrieval metric suite."""

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class RetrievalScores:
    phi_hat: np.ndarray  # target scores in [0, 1]
    phi_hat_perp: np.ndarray  # non-target scores in [0, 1]
    raw_weights: tuple  # (phi_tilde, phi_tilde_perp)
    clip_id: str = ""
    query_id: str = ""
    degenerate: bool = False

    def __post_init__(self):
        for s in (self.phi_hat, self.phi_hat_perp):
            if np.any((s < 0) | (s > 1)):
                raise ValueError("scores must lie in [0, 1]")


def fit_source_weights(est, targets, non_targets, ridge: float = 1e-8):
    """Least-squares weights reconstructing the estimate from the stems.

    Minimizes ||est - sum_i phi_i s_i||_F^2 (+ ridge * ||phi||^2) over the
    flattened signals. All-silent sources get weight 0 and set the
    degeneracy flag.

    Returns (phi_tilde, phi_tilde_perp, degenerate)."""
    est_flat = np.asarray(
        est.samples if hasattr(est, "samples") else est, dtype=np.float64).ravel()
    sources = [np.asarray(
        s.samples if hasattr(s, "samples") else s, dtype=np.float64).ravel()
        for s in list(targets) + list(non_targets)]
    if ridge < 0:
        raise ValueError("ridge must be >= 0")
    for s in sources:
        if s.shape != est_flat.shape:
            raise ValueError("all signals must share one shape")
    n_t = len(targets)
    live = [k for k, s in enumerate(sources) if np.any(s != 0.0)]
    degenerate = len(live) < len(sources)
    weights = np.zeros(len(sources))
    if live and np.any(est_flat != 0.0):
        A = np.stack([sources[k] for k in live], axis=1)
        if ridge == 0.0:
            sol, *_ = np.linalg.lstsq(A, est_flat, rcond=None)
        else:
            gram = A.T @ A + ridge * np.eye(len(live))
            sol = np.linalg.solve(gram, A.T @ est_flat)
        weights[live] = sol
    return weights[:n_t], weights[n_t:], degenerate


def normalize_scores(phi_tilde, phi_tilde_perp, clip_id="", query_id="",
                     degenerate=False) -> RetrievalScores:
    """Elementwise min{1, |.|} of the raw weights."""
    clamp = lambda w: np.minimum(1.0, np.abs(np.asarray(w, dtype=np.float64)))
    return RetrievalScores(
        phi_hat=clamp(phi_tilde), phi_hat_perp=clamp(phi_tilde_perp),
        raw_weights=(np.asarray(phi_tilde), np.asarray(phi_tilde_perp)),
        clip_id=clip_id, query_id=query_id, degenerate=degenerate,
    )


def score_separation(est, targets, non_targets, ridge=1e-8, clip_id="", query_id=""):
    phi, phi_perp, degenerate = fit_source_weights(est, targets, non_targets, ridge)
    return normalize_scores(phi, phi_perp, clip_id, query_id, degenerate)


# ---------------------------------------------------------------------------
# Ranking metrics (tie-aware, from scratch)

def average_precision(scores, labels):
    """AP by step-wise precision-recall summation; tied scores are one block.

    Returns None when there are no positives."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    n_pos = int(np.sum(labels))
    if n_pos == 0:
        return None
    order = np.argsort(-scores, kind="stable")
    scores, labels = scores[order], labels[order]
    ap = 0.0
    tp = fp = 0
    prev_recall = 0.0
    i = 0
    n = len(scores)
    while i < n:
        j = i
        while j < n and scores[j] == scores[i]:
            j += 1
        tp += int(np.sum(labels[i:j]))
        fp += (j - i) - int(np.sum(labels[i:j]))
        recall = tp / n_pos
        precision = tp / (tp + fp)
        ap += (recall - prev_recall) * precision
        prev_recall = recall
        i = j
    return ap


def roc_auc(scores, labels):
    """ROC AUC with the average-rank tie convention (Mann-Whitney).

    Returns None for single-class inputs."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    n_pos = int(np.sum(labels))
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores))
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j < len(scores) and sorted_scores[j] == sorted_scores[i]:
            j += 1
        ranks[order[i:j]] = 0.5 * (i + 1 + j)  # average of ranks i+1 .. j
        i = j
    rank_sum = float(np.sum(ranks[labels]))
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def thresholded_metrics(scores, labels, threshold=0.5):
    """Accuracy / precision / recall / F1 for score >= threshold."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    pred = scores >= threshold
    tp = int(np.sum(pred & labels))
    fp = int(np.sum(pred & ~labels))
    fn = int(np.sum(~pred & labels))
    tn = int(np.sum(~pred & ~labels))
    accuracy = (tp + tn) / len(labels) if len(labels) else 0.0
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {"accuracy": accuracy, "precision": precision,
            "recall": recall, "f1": f1}


def best_f1_threshold(scores, labels):
    """F1-maximizing threshold over the observed score values (plus 0.5)."""
    best = (0.0, 0.5)
    for t in sorted(set(np.asarray(scores, dtype=float)) | {0.5}):
        f1 = thresholded_metrics(scores, labels, t)["f1"]
        if f1 > best[0]:
            best = (f1, t)
    return best[1], best[0]


@dataclass
class MetricsReport:
    per_class: dict = field(default_factory=dict)
    macro: dict = field(default_factory=dict)
    micro: dict = field(default_factory=dict)
    weighted: dict = field(default_factory=dict)
    cells: dict = field(default_factory=dict)  # (n_mixture, n_target) -> stats


def _class_metrics(scores, labels, threshold):
    m = thresholded_metrics(scores, labels, threshold)
    m["ap"] = average_precision(scores, labels)
    m["roc_auc"] = roc_auc(scores, labels)
    t, f1 = best_f1_threshold(scores, labels)
    m["best_f1"] = f1
    m["best_f1_threshold"] = t
    m["support"] = int(np.sum(labels))
    m["count"] = len(labels)
    return m


def compute_metrics(records, threshold: float = 0.5) -> MetricsReport:
    """Aggregate scored items into per-class and pooled retrieval metrics.

    `records` is an iterable of (class_label, score, is_positive). Macro
    averages are unweighted over classes, micro pools all items, weighted
    averages use per-class positive support."""
    records = list(records)
    if not records:
        raise ValueError("no score records")
    by_class = {}
    for label, score, positive in records:
        by_class.setdefault(label, ([], []))
        by_class[label][0].append(float(score))
        by_class[label][1].append(bool(positive))
    report = MetricsReport()
    for label, (s, y) in sorted(by_class.items()):
        report.per_class[label] = _class_metrics(np.array(s), np.array(y), threshold)
    keys = ("ap", "roc_auc", "accuracy", "precision", "recall", "f1")
    for key in keys:
        vals = [(m[key], m["support"]) for m in report.per_class.values()
                if m[key] is not None]
        if vals:
            report.macro[key] = float(np.mean([v for v, _ in vals]))
            wsum = sum(w for _, w in vals)
            if wsum > 0:
                report.weighted[key] = float(
                    sum(v * w for v, w in vals) / wsum)
    all_scores = np.array([r[1] for r in records], dtype=float)
    all_labels = np.array([r[2] for r in records], dtype=bool)
    report.micro = _class_metrics(all_scores, all_labels, threshold)
    return report


def group_analysis(per_query, threshold: float = 0.5) -> MetricsReport:
    """Per-(mixture size, target size) cells of median SNR and weighted mAP.

    `per_query` is an iterable of dicts with keys n_mixture, n_target,
    snr_db, and records (list of (class_label, score, is_positive))."""
    groups = {}
    for item in per_query:
        key = (item["n_mixture"], item["n_target"])
        groups.setdefault(key, {"snr": [], "records": []})
        groups[key]["snr"].append(item["snr_db"])
        groups[key]["records"].extend(item["records"])
    report = MetricsReport()
    for key, g in sorted(groups.items()):
        sub = compute_metrics(g["records"], threshold)
        report.cells[key] = {
            "median_snr_db": float(np.median(g["snr"])),
            "weighted_map": sub.weighted.get("ap"),
            "unweighted_map": sub.macro.get("ap"),
            "num_queries": len(g["snr"]),
            "target_ratio": key[1] / key[0] if key[0] else None,
        }
    return report
