"""Query-space construction: mock clip embedder, PCA fit/projection, persistence."""

import json
from dataclasses import dataclass, field

import numpy as np

from .signal import AudioChunk, StftConfig, stft

MOCK_DIM = 24
MIN_EMBED_SECONDS = 0.5


@dataclass(frozen=True)
class EmbeddingSet:
    vectors: np.ndarray  # n x P
    source_ids: list
    space_dim: int

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float64).reshape(-1, self.space_dim)
        if not np.all(np.isfinite(v)):
            raise ValueError("embedding vectors must be finite")
        if len(self.source_ids) != v.shape[0]:
            raise ValueError("source_ids length mismatch")
        if len(set(self.source_ids)) != len(self.source_ids):
            raise ValueError("source_ids must be unique")
        object.__setattr__(self, "vectors", v)


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray  # P
    components: np.ndarray  # D x P, orthonormal rows
    eigenvalues: np.ndarray  # D, nonincreasing
    total_variance: float

    def __post_init__(self):
        C = np.asarray(self.components, dtype=np.float64)
        if np.max(np.abs(C @ C.T - np.eye(C.shape[0]))) > 1e-8:
            raise ValueError("components must be orthonormal")
        ev = np.asarray(self.eigenvalues, dtype=np.float64)
        if np.any(np.diff(ev) > 1e-12) or np.any(ev < -1e-12):
            raise ValueError("eigenvalues must be nonincreasing and >= 0")

    @property
    def out_dim(self):
        return self.components.shape[0]

    @property
    def explained_variance_ratio(self):
        return float(np.sum(self.eigenvalues) / self.total_variance)


def _mel_edges(num_bands, num_bins, sample_rate, fft_size):
    """Mel-spaced band edges over the rfft bins, first band starting at bin 1."""
    fmax = sample_rate / 2.0
    mel = lambda f: 2595.0 * np.log10(1.0 + f / 700.0)
    inv = lambda m: 700.0 * (10.0 ** (m / 2595.0) - 1.0)
    freqs = inv(np.linspace(mel(40.0), mel(fmax), num_bands + 1))
    edges = np.round(freqs * fft_size / sample_rate).astype(int)
    # force strictly increasing within [1, num_bins] so every band is non-empty
    edges = np.maximum(edges, np.arange(num_bands + 1) + 1)
    edges = np.minimum(edges, num_bins - num_bands + np.arange(num_bands + 1))
    return edges


def mock_embed(audio: AudioChunk, num_bands: int = MOCK_DIM,
               stft_cfg: StftConfig = StftConfig()) -> np.ndarray:
    """Deterministic stand-in feature: log-energies over mel-spaced bands of the
    time-averaged magnitude spectrum, mean-removed and L2-normalized.

    Mean removal makes the feature invariant to overall gain."""
    if audio.duration < MIN_EMBED_SECONDS:
        raise ValueError(
            f"audio too short to embed: {audio.duration:.3f} s < {MIN_EMBED_SECONDS} s"
        )
    spec = stft(audio, stft_cfg)
    mag = np.mean(np.abs(spec.bins), axis=(0, 2))  # F
    edges = _mel_edges(num_bands, stft_cfg.num_bins, audio.sample_rate, stft_cfg.fft_size)
    energies = np.array(
        [np.sum(mag[edges[k]:edges[k + 1]] ** 2) for k in range(num_bands)]
    )
    v = np.log(energies + 1e-12)
    v = v - np.mean(v)
    norm = np.linalg.norm(v)
    if norm < 1e-12:
        return np.zeros(num_bands)
    return v / norm


def fit_pca(data: EmbeddingSet, out_dim: int) -> PcaModel:
    """Top-out_dim eigenvectors of the sample covariance (divisor n-1)."""
    X = data.vectors
    n, P = X.shape
    if n < 2:
        raise ValueError("need at least 2 vectors to fit PCA")
    if not (1 <= out_dim <= min(n - 1, P)):
        raise ValueError(f"out_dim must be in [1, min(n-1, P)] = [1, {min(n - 1, P)}]")
    mean = np.mean(X, axis=0)
    cov = (X - mean).T @ (X - mean) / (n - 1)
    eigval, eigvec = np.linalg.eigh(cov)
    order = np.argsort(eigval)[::-1]
    eigval = np.maximum(eigval[order], 0.0)
    eigvec = eigvec[:, order]
    return PcaModel(
        mean=mean,
        components=eigvec[:, :out_dim].T.copy(),
        eigenvalues=eigval[:out_dim].copy(),
        total_variance=float(np.sum(eigval)),
    )


def project(model: PcaModel, z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.shape != model.mean.shape:
        raise ValueError("dimension mismatch")
    return model.components @ (z - model.mean)


def save_pca(path, model: PcaModel):
    payload = {
        "mean": model.mean.tolist(),
        "components": model.components.tolist(),
        "eigenvalues": model.eigenvalues.tolist(),
        "total_variance": model.total_variance,
    }
    with open(path, "w") as f:
        json.dump(payload, f, sort_keys=True)


def load_pca(path) -> PcaModel:
    with open(path) as f:
        p = json.load(f)
    return PcaModel(
        mean=np.array(p["mean"]),
        components=np.array(p["components"]),
        eigenvalues=np.array(p["eigenvalues"]),
        total_variance=p["total_variance"],
    )


def export_embeddings(path, records):
    """Write one JSON record per line: {"id": stem id, "dim": P, "values": [...]}"""
    with open(path, "w") as f:
        for sid, vec in records:
            vec = np.asarray(vec, dtype=np.float64)
            f.write(json.dumps({"id": sid, "dim": len(vec), "values": vec.tolist()}) + "\n")


def import_embeddings(path) -> EmbeddingSet:
    ids, rows, dim = [], [], None
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                vec = np.asarray(rec["values"], dtype=np.float64)
                sid = rec["id"]
                d = int(rec["dim"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}: malformed record at line {lineno}: {exc}")
            if vec.shape != (d,):
                raise ValueError(f"{path}: line {lineno}: got {vec.shape[0]} values, declared {d}")
            if dim is None:
                dim = d
            elif d != dim:
                raise ValueError(f"{path}: line {lineno}: dimension {d} != {dim}")
            ids.append(sid)
            rows.append(vec)
    if dim is None:
        raise ValueError(f"{path}: no embedding records")
    return EmbeddingSet(vectors=np.array(rows), source_ids=ids, space_dim=dim)
