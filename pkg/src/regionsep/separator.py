"""Band-split masking separator with FiLM conditioning, weight-normalized
linear layers, global level normalization, the training loop, and the
ground-truth oracle separator."""

import json
import struct
from dataclasses import dataclass, field

import numpy as np
import torch

from .geometry import Hyperellipsoid, contains, query_vector_length, to_query_vector
from .loss import LossConfig, total_loss
from .signal import AudioChunk, StftConfig
from .torchsig import istft_t, stft_t

CKPT_MAGIC = b"RSEP"
CKPT_VERSION = 1
RMS_GUARD = 1e-6


@dataclass(frozen=True)
class ModelConfig:
    num_channels: int = 2
    stft: StftConfig = field(default_factory=StftConfig)
    num_bands: int = 8
    feat_dim: int = 8
    query_dim: int = 8  # embedding-space dimensionality D
    film_hidden: int = 64
    dec_hidden: int = 64
    mask_bound: float = 2.0

    @property
    def num_bins(self):
        return self.stft.num_bins

    @property
    def query_vector_dim(self):
        return query_vector_length(self.query_dim)


def band_edges(num_bins, num_bands):
    """Contiguous near-equal partition of the F bins into bands."""
    edges = np.linspace(0, num_bins, num_bands + 1).round().astype(int)
    return list(zip(edges[:-1], edges[1:]))


class WeightNormLinear(torch.nn.Module):
    """Linear layer with per-row weight normalization: w = g * v / ||v||."""

    def __init__(self, in_features, out_features, generator=None):
        super().__init__()
        bound = 1.0 / np.sqrt(in_features)
        v = torch.empty(out_features, in_features, dtype=torch.float64)
        v.uniform_(-bound, bound, generator=generator)
        self.v = torch.nn.Parameter(v)
        self.g = torch.nn.Parameter(v.norm(dim=1).detach().clone())
        b = torch.empty(out_features, dtype=torch.float64)
        b.uniform_(-bound, bound, generator=generator)
        self.bias = torch.nn.Parameter(b)

    def effective_weight(self):
        return self.g[:, None] * self.v / self.v.norm(dim=1, keepdim=True)

    def forward(self, x):
        return torch.nn.functional.linear(x, self.effective_weight(), self.bias)


class SeparatorModel(torch.nn.Module):
    def __init__(self, cfg: ModelConfig = ModelConfig(), seed: int = 0):
        super().__init__()
        self.cfg = cfg
        self.bands = band_edges(cfg.num_bins, cfg.num_bands)
        # gather indices mapping (band, in-band offset) <-> spectrogram bin,
        # zero-padded to the widest band so all bands batch into one bmm
        w_max = max(hi - lo for lo, hi in self.bands)
        enc_idx, enc_mask, dec_idx = [], [], []
        for b, (lo, hi) in enumerate(self.bands):
            for j in range(w_max):
                inside = j < hi - lo
                enc_idx.append(lo + j if inside else 0)
                enc_mask.append(1.0 if inside else 0.0)
            dec_idx.extend(b * w_max + j for j in range(hi - lo))
        self.register_buffer("enc_idx", torch.tensor(enc_idx), persistent=False)
        self.register_buffer("enc_mask",
                             torch.tensor(enc_mask, dtype=torch.float64),
                             persistent=False)
        self.register_buffer("dec_idx", torch.tensor(dec_idx), persistent=False)
        gen = torch.Generator().manual_seed(seed)
        C, D = cfg.num_channels, cfg.feat_dim
        self.enc_layers = torch.nn.ModuleList(
            WeightNormLinear(2 * C * (hi - lo), D, gen) for lo, hi in self.bands
        )
        self.film_in = WeightNormLinear(cfg.query_vector_dim, cfg.film_hidden, gen)
        self.film_out = WeightNormLinear(cfg.film_hidden, 2 * D, gen)
        self.dec_hidden_layers = torch.nn.ModuleList(
            WeightNormLinear(D, cfg.dec_hidden, gen) for _ in self.bands
        )
        self.dec_out_layers = torch.nn.ModuleList(
            WeightNormLinear(cfg.dec_hidden, 2 * C * (hi - lo), gen)
            for lo, hi in self.bands
        )

    @property
    def _w_max(self):
        return max(hi - lo for lo, hi in self.bands)

    def _stacked_weights(self, layers, pad_dim):
        """Batch per-band layers into one weight/bias pair, zero-padding the
        uneven band widths. pad_dim is 'in' or 'out' (which side holds the
        per-bin axis)."""
        twoC = 2 * self.cfg.num_channels
        w_max = self._w_max
        ws, bs = [], []
        for (lo, hi), layer in zip(self.bands, layers):
            w = hi - lo
            weight = layer.effective_weight()
            if pad_dim == "in":
                weight = weight.reshape(-1, twoC, w)
                weight = torch.nn.functional.pad(weight, (0, w_max - w))
                weight = weight.reshape(-1, twoC * w_max)
                bias = layer.bias
            else:
                weight = weight.reshape(twoC, w, -1)
                weight = torch.nn.functional.pad(weight, (0, 0, 0, w_max - w))
                weight = weight.reshape(twoC * w_max, -1)
                bias = torch.nn.functional.pad(
                    layer.bias.reshape(twoC, w), (0, w_max - w)).reshape(-1)
            ws.append(weight)
            bs.append(bias)
        return torch.stack(ws), torch.stack(bs)

    def encode(self, X: torch.Tensor) -> torch.Tensor:
        """Complex C x F x T -> features D x B x T."""
        C, F, T = X.shape
        cfg = self.cfg
        if C != cfg.num_channels or F != cfg.num_bins:
            raise ValueError(
                f"input shape {tuple(X.shape)} incompatible with model dims"
            )
        w_max = self._w_max
        B = cfg.num_bands
        Xr = torch.cat([X.real, X.imag], dim=0)  # 2C x F x T
        g = Xr.index_select(1, self.enc_idx) * self.enc_mask[None, :, None]
        inp = (g.reshape(2 * C, B, w_max, T)
               .permute(1, 3, 0, 2).reshape(B, T, 2 * C * w_max))
        Ws, Bs = self._stacked_weights(self.enc_layers, "in")
        out = torch.tanh(torch.bmm(inp, Ws.transpose(1, 2)) + Bs[:, None, :])
        return out.permute(2, 0, 1)  # D x B x T

    def film(self, q: torch.Tensor):
        """Query vector -> FiLM parameters (gamma, beta), each of size D."""
        h = torch.tanh(self.film_in(q))
        out = self.film_out(h)
        D = self.cfg.feat_dim
        return out[:D], out[D:]

    @staticmethod
    def condition(V, gamma, beta):
        """U = gamma * V + beta, broadcast over bands and frames."""
        return gamma[:, None, None] * V + beta[:, None, None]

    def decode(self, U: torch.Tensor) -> torch.Tensor:
        """Features D x B x T -> complex mask C x F x T, components in
        (-mask_bound, mask_bound)."""
        D, B, T = U.shape
        cfg = self.cfg
        C = cfg.num_channels
        w_max = self._w_max
        Wh = torch.stack([l.effective_weight() for l in self.dec_hidden_layers])
        Bh = torch.stack([l.bias for l in self.dec_hidden_layers])
        Wo, Bo = self._stacked_weights(self.dec_out_layers, "out")
        h = torch.tanh(torch.bmm(U.permute(1, 2, 0), Wh.transpose(1, 2))
                       + Bh[:, None, :])  # B x T x H
        coeff = cfg.mask_bound * torch.tanh(
            torch.bmm(h, Wo.transpose(1, 2)) + Bo[:, None, :])
        # B x T x 2C*w_max -> 2C x F x T via the valid-bin gather
        coeff = (coeff.reshape(B, T, 2 * C, w_max)
                 .permute(2, 0, 3, 1).reshape(2 * C, B * w_max, T))
        coeff = coeff.index_select(1, self.dec_idx)
        return torch.complex(coeff[:C], coeff[C:])  # C x F x T

    def compute_mask(self, X: torch.Tensor, q: torch.Tensor) -> torch.Tensor:
        V = self.encode(X)
        gamma, beta = self.film(q)
        U = self.condition(V, gamma, beta)
        return self.decode(U)

    def forward(self, x: torch.Tensor, q: torch.Tensor) -> torch.Tensor:
        """Separate one chunk: C x N samples + query vector -> C x N estimate.

        The pipeline runs on RMS-normalized input and the output is
        denormalized, so separation is equivariant to input level."""
        rms = torch.sqrt(torch.mean(x**2))
        g = 1.0 / torch.clamp(rms, min=RMS_GUARD).detach()
        X = stft_t(g * x, self.cfg.stft)
        M = self.compute_mask(X, q)
        Y = M * X
        return istft_t(Y, self.cfg.stft, x.shape[-1]) / g

    def forward_batch(self, xs, qs):
        """Separate several chunks in one pass; returns a list of estimates.

        The encoder and decoder are query-independent band maps applied
        frame-wise, so the samples are concatenated along the frame axis and
        run through one bmm each; only the FiLM conditioning is per sample.
        Equivalent to calling forward() on each pair, but builds the stacked
        band weights once per batch."""
        gains, Xs, Ts = [], [], []
        for x in xs:
            rms = torch.sqrt(torch.mean(x**2))
            g = 1.0 / torch.clamp(rms, min=RMS_GUARD).detach()
            X = stft_t(g * x, self.cfg.stft)
            gains.append(g)
            Xs.append(X)
            Ts.append(X.shape[-1])
        V = self.encode(torch.cat(Xs, dim=-1))
        Us = []
        pos = 0
        for q, T in zip(qs, Ts):
            gamma, beta = self.film(q)
            Us.append(self.condition(V[:, :, pos:pos + T], gamma, beta))
            pos += T
        M = self.decode(torch.cat(Us, dim=-1))
        outs = []
        pos = 0
        for x, X, g, T in zip(xs, Xs, gains, Ts):
            Y = M[:, :, pos:pos + T] * X
            outs.append(istft_t(Y, self.cfg.stft, x.shape[-1]) / g)
            pos += T
        return outs


def separate(x: AudioChunk, query: Hyperellipsoid, model: SeparatorModel,
             stft_cfg: StftConfig = None) -> AudioChunk:
    """Run the model on an audio chunk with a hyperellipsoid query."""
    if stft_cfg is not None and stft_cfg != model.cfg.stft:
        raise ValueError("stft config does not match the model")
    dt = next(model.parameters()).dtype
    q = torch.from_numpy(to_query_vector(query)).to(dt)
    with torch.no_grad():
        y = model(torch.from_numpy(x.samples).to(dt), q)
    return AudioChunk(samples=y.numpy().astype(np.float64),
                      sample_rate=x.sample_rate)


def oracle_separate(stems, embeddings, query: Hyperellipsoid) -> AudioChunk:
    """Ground truth: exact sum of the stems whose embeddings lie in the query."""
    embeddings = np.asarray(embeddings, dtype=np.float64)
    if len(stems) != embeddings.shape[0]:
        raise ValueError("embeddings not aligned with stems")
    out = np.zeros_like(stems[0].samples)
    for stem, z in zip(stems, embeddings):
        if contains(query, z):
            out = out + stem.samples
    return AudioChunk(samples=out, sample_rate=stems[0].sample_rate)


# ---------------------------------------------------------------------------
# Training

@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    lr_decay_per_epoch: float = 0.98
    batch_size: int = 4
    batches_per_epoch: int = 256
    epochs: int = 10
    chunk_seconds: float = 10.0
    seed: int = 0
    weight_decay: float = 1e-2
    gain_jitter_db: float = 6.0
    dtype: str = "float64"

    def __post_init__(self):
        if self.lr < 0:
            raise ValueError("lr must be >= 0")
        if not (0 < self.lr_decay_per_epoch <= 1):
            raise ValueError("lr decay must be in (0, 1]")
        if self.dtype not in ("float32", "float64"):
            raise ValueError("dtype must be float32 or float64")


def augment_stem(samples, rng, gain_jitter_db):
    """Random gain in +/- gain_jitter_db and random channel swap."""
    gain = 10.0 ** (rng.uniform(-gain_jitter_db, gain_jitter_db) / 20.0)
    out = samples * gain
    if out.shape[0] == 2 and rng.random() < 0.5:
        out = out[::-1]
    return out


def make_training_pair(spec, stems_by_index, query, rng, gain_jitter_db=6.0):
    """Build (mixture, target) from one QuerySpec with shared augmentation.

    The mixture sums augmented stems over targets and surviving non-targets;
    the target sums the same augmented target stems."""
    mix = None
    target = None
    for idx in sorted(spec.target_indices | spec.non_target_indices):
        aug = augment_stem(stems_by_index[idx], rng, gain_jitter_db)
        mix = aug if mix is None else mix + aug
        if idx in spec.target_indices:
            target = aug if target is None else target + aug
    if target is None:
        target = np.zeros_like(mix)
    return mix, target


def train(model: SeparatorModel, sampler, loss_cfg: LossConfig = LossConfig(),
          train_cfg: TrainConfig = TrainConfig(), log_every: int = 0):
    """Train with AdamW and per-epoch exponential lr decay.

    `sampler(rng)` must yield (mix C x N, target C x N, query Hyperellipsoid)
    training triples. Returns a history dict with per-step losses and
    per-epoch learning rates. Deterministic given the seed."""
    torch.set_num_threads(1)
    dt = torch.float32 if train_cfg.dtype == "float32" else torch.float64
    model.to(dt)
    rng = np.random.default_rng(train_cfg.seed)
    opt = torch.optim.AdamW(model.parameters(), lr=train_cfg.lr,
                            betas=(0.9, 0.999), eps=1e-8,
                            weight_decay=train_cfg.weight_decay,
                            foreach=True)  # CPU defaults to a per-tensor loop
    sched = torch.optim.lr_scheduler.ExponentialLR(
        opt, gamma=train_cfg.lr_decay_per_epoch)
    history = {"loss": [], "lr": []}
    for epoch in range(train_cfg.epochs):
        for step in range(train_cfg.batches_per_epoch):
            opt.zero_grad()
            xs, ys, q_vecs = [], [], []
            for _ in range(train_cfg.batch_size):
                mix, target, query = sampler(rng)
                xs.append(torch.from_numpy(np.ascontiguousarray(mix)).to(dt))
                ys.append(torch.from_numpy(np.ascontiguousarray(target)).to(dt))
                q_vecs.append(torch.from_numpy(to_query_vector(query)).to(dt))
            batch_loss = 0.0
            for est, y in zip(model.forward_batch(xs, q_vecs), ys):
                J, _report = total_loss(est, y, model.cfg.stft, loss_cfg)
                batch_loss = batch_loss + J
            batch_loss = batch_loss / train_cfg.batch_size
            if not torch.isfinite(batch_loss):
                raise RuntimeError(
                    f"training diverged: non-finite loss at epoch {epoch} step {step}"
                )
            batch_loss.backward()
            opt.step()
            history["loss"].append(float(batch_loss.detach()))
            if log_every and (step + 1) % log_every == 0:
                print(f"epoch {epoch} step {step + 1}: loss {float(batch_loss.detach()):.3f}")
        history["lr"].append(opt.param_groups[0]["lr"])
        sched.step()
    return history


# ---------------------------------------------------------------------------
# Checkpoints: magic + json header (config + parameter index) + float64 blob.

def save_checkpoint(path, model: SeparatorModel):
    state = model.state_dict()
    names = sorted(state.keys())
    header = {
        "config": {
            "num_channels": model.cfg.num_channels,
            "fft_size": model.cfg.stft.fft_size,
            "hop": model.cfg.stft.hop,
            "window": model.cfg.stft.window,
            "num_bands": model.cfg.num_bands,
            "feat_dim": model.cfg.feat_dim,
            "query_dim": model.cfg.query_dim,
            "film_hidden": model.cfg.film_hidden,
            "dec_hidden": model.cfg.dec_hidden,
            "mask_bound": model.cfg.mask_bound,
        },
        "params": [[n, list(state[n].shape)] for n in names],
    }
    hdr = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(CKPT_MAGIC)
        f.write(struct.pack("<BI", CKPT_VERSION, len(hdr)))
        f.write(hdr)
        for n in names:
            f.write(state[n].numpy().astype("<f8").tobytes())


def load_checkpoint(path) -> SeparatorModel:
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != CKPT_MAGIC:
        raise ValueError(f"{path}: not a model checkpoint")
    version, hlen = struct.unpack_from("<BI", data, 4)
    if version != CKPT_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    header = json.loads(data[9:9 + hlen].decode("utf-8"))
    c = header["config"]
    cfg = ModelConfig(
        num_channels=c["num_channels"],
        stft=StftConfig(fft_size=c["fft_size"], hop=c["hop"], window=c["window"]),
        num_bands=c["num_bands"], feat_dim=c["feat_dim"], query_dim=c["query_dim"],
        film_hidden=c["film_hidden"], dec_hidden=c["dec_hidden"],
        mask_bound=c["mask_bound"],
    )
    model = SeparatorModel(cfg)
    off = 9 + hlen
    state = {}
    for name, shape in header["params"]:
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=off).copy()
        off += 8 * count
        state[name] = torch.from_numpy(arr.reshape(shape))
    model.load_state_dict(state)
    return model
