"""Synthetic multi-stem dataset generation, stem-folder ingestion, chunking,
mixing, and the train/val/test manifest."""

import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .signal import AudioChunk, read_wav, write_wav

MANIFEST_INDEX = "index.jsonl"
MANIFEST_KIND = "regionsep-manifest"
MANIFEST_VERSION = 1

DEFAULT_SPLITS = {"train": 0.7, "val": 0.15, "test": 0.15}


@dataclass(frozen=True)
class Stem:
    stem_id: str
    class_label: str
    audio: AudioChunk


@dataclass(frozen=True)
class StemTrack:
    track_id: str
    stems: list
    sample_rate: int

    def __post_init__(self):
        lengths = {s.audio.num_samples for s in self.stems}
        rates = {s.audio.sample_rate for s in self.stems}
        if len(lengths) > 1 or (rates and rates != {self.sample_rate}):
            raise ValueError(f"{self.track_id}: stems differ in length or rate")

    @property
    def duration(self):
        return self.stems[0].audio.duration if self.stems else 0.0


@dataclass(frozen=True)
class ClipIndex:
    clip_id: str
    track_id: str
    start: float
    length: float = 10.0


@dataclass(frozen=True)
class DatasetConfig:
    num_tracks: int = 24
    duration: float = 30.0
    sample_rate: int = 16000
    num_channels: int = 2
    min_stems: int = 5
    max_stems: int = 8
    amplitude: float = 0.15


# ---------------------------------------------------------------------------
# Synthetic stem archetypes. Each occupies a distinct frequency range so the
# band-energy embedder cleanly separates the classes.

def _pan(x, rng):
    """Mono -> stereo with a random constant pan."""
    theta = rng.uniform(0.2, np.pi / 2 - 0.2)
    return np.stack([np.cos(theta) * x, np.sin(theta) * x])


def _am_envelope(n, sr, rng, lo=0.5, hi=3.0, depth=0.5):
    t = np.arange(n) / sr
    rate = rng.uniform(lo, hi)
    phase = rng.uniform(0, 2 * np.pi)
    return 1.0 - depth + depth * 0.5 * (1.0 + np.sin(2 * np.pi * rate * t + phase))

def _harmonic_stack(n, sr, rng, f0_range, harmonics=4):
    t = np.arange(n) / sr
    f0 = rng.uniform(*f0_range)
    x = np.zeros(n)
    for k in range(1, harmonics + 1):
        x += np.sin(2 * np.pi * k * f0 * t + rng.uniform(0, 2 * np.pi)) / k
    return x * _am_envelope(n, sr, rng)


def _fm_voice(n, sr, rng, carrier_range, mod_range=(4.0, 9.0), index=(1.0, 3.0)):
    t = np.arange(n) / sr
    fc = rng.uniform(*carrier_range)
    fm = rng.uniform(*mod_range)
    beta = rng.uniform(*index)
    x = np.sin(2 * np.pi * fc * t + beta * np.sin(2 * np.pi * fm * t))
    return x * _am_envelope(n, sr, rng, depth=0.4)


def _chirp_train(n, sr, rng, f_lo, f_hi, period_range=(0.6, 1.2)):
    t = np.arange(n) / sr
    period = rng.uniform(*period_range)
    phase = (t / period) % 1.0
    freq = f_lo + (f_hi - f_lo) * phase
    # phase integral of a repeating linear sweep
    inst_phase = 2 * np.pi * np.cumsum(freq) / sr
    return np.sin(inst_phase + rng.uniform(0, 2 * np.pi)) * _am_envelope(n, sr, rng, depth=0.3)


def _bandnoise_percussion(n, sr, rng, f_lo, f_hi, rate_range=(1.5, 3.5)):
    noise = rng.standard_normal(n)
    spec = np.fft.rfft(noise)
    freqs = np.fft.rfftfreq(n, 1.0 / sr)
    spec[(freqs < f_lo) | (freqs > f_hi)] = 0.0
    band = np.fft.irfft(spec, n)
    band /= max(np.max(np.abs(band)), 1e-9)
    rate = rng.uniform(*rate_range)
    t = np.arange(n) / sr
    env = np.exp(-8.0 * ((t * rate) % 1.0))
    return band * env


def _pluck_tone(n, sr, rng, f0_range, rate_range=(0.8, 1.6)):
    t = np.arange(n) / sr
    f0 = rng.uniform(*f0_range)
    rate = rng.uniform(*rate_range)
    env = np.exp(-4.0 * ((t * rate) % 1.0))
    x = np.sin(2 * np.pi * f0 * t) + 0.4 * np.sin(2 * np.pi * 2 * f0 * t)
    return x * env


ARCHETYPES = {
    "bass_stack": lambda n, sr, rng: _harmonic_stack(n, sr, rng, (55, 105), 4),
    "low_pad": lambda n, sr, rng: _harmonic_stack(n, sr, rng, (160, 250), 3),
    "am_voice": lambda n, sr, rng: _fm_voice(n, sr, rng, (330, 520), (3.0, 6.0), (0.5, 1.5)),
    "mid_pluck": lambda n, sr, rng: _pluck_tone(n, sr, rng, (600, 820)),
    "fm_lead": lambda n, sr, rng: _fm_voice(n, sr, rng, (950, 1400)),
    "chirp": lambda n, sr, rng: _chirp_train(n, sr, rng, 1800.0, 3100.0),
    "noise_perc": lambda n, sr, rng: _bandnoise_percussion(n, sr, rng, 3600.0, 5600.0),
    "hi_shimmer": lambda n, sr, rng: _fm_voice(n, sr, rng, (6200, 7200), (5.0, 9.0), (0.2, 0.8)),
}


def generate_synthetic_tracks(cfg: DatasetConfig = DatasetConfig(), seed: int = 0):
    """Deterministic synthetic multi-stem corpus, one rng stream per track."""
    names = sorted(ARCHETYPES)
    if not (cfg.min_stems <= cfg.max_stems <= len(names)):
        raise ValueError("stem count range incompatible with archetype count")
    n = int(round(cfg.duration * cfg.sample_rate))
    tracks = []
    for t_idx in range(cfg.num_tracks):
        rng = np.random.default_rng([seed, t_idx])
        track_id = f"track{t_idx:03d}"
        n_stems = int(rng.integers(cfg.min_stems, cfg.max_stems + 1))
        chosen = sorted(rng.choice(len(names), size=n_stems, replace=False))
        stems = []
        for k in chosen:
            name = names[k]
            mono = ARCHETYPES[name](n, cfg.sample_rate, rng)
            gain = cfg.amplitude * 10.0 ** (rng.uniform(-4.0, 4.0) / 20.0)
            x = gain * mono / max(float(np.max(np.abs(mono))), 1e-9)
            if cfg.num_channels == 2:
                x = _pan(x, rng)
            else:
                x = x[None, :]
            stems.append(Stem(
                stem_id=f"{track_id}-{name}",
                class_label=name,
                audio=AudioChunk(samples=x, sample_rate=cfg.sample_rate),
            ))
        tracks.append(StemTrack(track_id=track_id, stems=stems,
                                sample_rate=cfg.sample_rate))
    return tracks


def chunk_track(track_or_duration, window: float = 10.0, stride: float = 1.0,
                track_id: str = None):
    """All maximal sliding-window clips; count = floor((dur - window)/stride) + 1."""
    if isinstance(track_or_duration, StemTrack):
        dur = track_or_duration.duration
        track_id = track_or_duration.track_id
    else:
        dur = float(track_or_duration)
    if dur < window:
        return []
    count = int(np.floor((dur - window) / stride + 1e-9)) + 1
    return [
        ClipIndex(clip_id=f"{track_id}:{k * stride:g}", track_id=track_id,
                  start=k * stride, length=window)
        for k in range(count)
    ]


def clip_audio(stem: Stem, clip: ClipIndex) -> AudioChunk:
    sr = stem.audio.sample_rate
    a = int(round(clip.start * sr))
    b = a + int(round(clip.length * sr))
    return AudioChunk(samples=stem.audio.samples[:, a:b], sample_rate=sr)


def mix(stems, like: AudioChunk = None) -> AudioChunk:
    """Sample-exact sum in stem-index order; an empty set is silence shaped
    after `like`."""
    stems = list(stems)
    if not stems:
        if like is None:
            raise ValueError("mix of an empty set needs a reference shape")
        return silence_like(like)
    chunks = [s.audio if isinstance(s, Stem) else s for s in stems]
    total = np.zeros_like(chunks[0].samples)
    for c in chunks:
        total = total + c.samples
    return AudioChunk(samples=total, sample_rate=chunks[0].sample_rate)


def silence_like(chunk: AudioChunk) -> AudioChunk:
    return AudioChunk(samples=np.zeros_like(chunk.samples),
                      sample_rate=chunk.sample_rate)


def split_of(track_id: str, splits: dict = None) -> str:
    """Pure hash of the track id against cumulative split ratios."""
    splits = splits or DEFAULT_SPLITS
    u = int(hashlib.sha256(track_id.encode()).hexdigest()[:8], 16) / 2**32
    acc = 0.0
    names = list(splits)
    for name in names:
        acc += splits[name]
        if u < acc:
            return name
    return names[-1]


def ingest_stem_folder(path, track_id: str = None) -> StemTrack:
    """Folder of equal-length WAV stems plus a labels.json sidecar."""
    labels_path = os.path.join(path, "labels.json")
    if not os.path.exists(labels_path):
        raise ValueError(f"{path}: missing labels.json sidecar")
    with open(labels_path) as f:
        labels = json.load(f)
    problems = []
    stems = []
    rate = None
    length = None
    for fname in sorted(labels):
        fpath = os.path.join(path, fname)
        try:
            audio = read_wav(fpath)
        except Exception as exc:
            problems.append(f"{fname}: {exc}")
            continue
        if rate is None:
            rate, length = audio.sample_rate, audio.num_samples
        if audio.sample_rate != rate:
            problems.append(f"{fname}: sample rate {audio.sample_rate} != {rate}")
        elif audio.num_samples != length:
            problems.append(f"{fname}: length {audio.num_samples} != {length}")
        else:
            stems.append(Stem(stem_id=os.path.splitext(fname)[0],
                              class_label=labels[fname], audio=audio))
    if problems:
        raise ValueError(f"{path}: inconsistent stems:\n  " + "\n  ".join(problems))
    if not stems:
        raise ValueError(f"{path}: no stems found")
    return StemTrack(track_id=track_id or os.path.basename(os.path.normpath(path)),
                     stems=stems, sample_rate=rate)


# ---------------------------------------------------------------------------
# Manifest: versioned line-delimited index + WAV payloads per track.

def write_manifest(root, tracks, seed, splits=None, extra=None):
    splits = splits or DEFAULT_SPLITS
    os.makedirs(root, exist_ok=True)
    lines = [json.dumps({
        "kind": MANIFEST_KIND, "version": MANIFEST_VERSION, "seed": seed,
        "splits": splits, **(extra or {}),
    }, sort_keys=True)]
    for track in tracks:
        tdir = os.path.join(root, "tracks", track.track_id)
        os.makedirs(tdir, exist_ok=True)
        stem_entries = []
        for stem in track.stems:
            rel = os.path.join("tracks", track.track_id, stem.stem_id + ".wav")
            write_wav(os.path.join(root, rel), stem.audio)
            stem_entries.append({"id": stem.stem_id, "class": stem.class_label,
                                 "wav": rel.replace(os.sep, "/")})
        lines.append(json.dumps({
            "track": track.track_id, "split": split_of(track.track_id, splits),
            "duration": track.duration, "sample_rate": track.sample_rate,
            "stems": stem_entries,
        }, sort_keys=True))
    # atomic: write fully, then rename over the index path
    tmp = os.path.join(root, MANIFEST_INDEX + ".tmp")
    with open(tmp, "w") as f:
        f.write("\n".join(lines) + "\n")
    os.replace(tmp, os.path.join(root, MANIFEST_INDEX))


class Manifest:
    """Read-side view of a dataset directory, with lazy per-track audio cache."""

    def __init__(self, root):
        self.root = root
        index = os.path.join(root, MANIFEST_INDEX)
        if not os.path.exists(index):
            raise FileNotFoundError(f"{root}: no {MANIFEST_INDEX}; run gen-data first")
        with open(index) as f:
            lines = [json.loads(ln) for ln in f if ln.strip()]
        self.header = lines[0]
        if self.header.get("kind") != MANIFEST_KIND:
            raise ValueError(f"{index}: not a {MANIFEST_KIND}")
        self.track_entries = {e["track"]: e for e in lines[1:]}
        self._cache = {}

    def track_ids(self, split=None):
        return [t for t, e in self.track_entries.items()
                if split is None or e["split"] == split]

    def load_track(self, track_id) -> StemTrack:
        if track_id not in self._cache:
            e = self.track_entries[track_id]
            stems = [
                Stem(stem_id=s["id"], class_label=s["class"],
                     audio=read_wav(os.path.join(self.root, s["wav"]),
                                    expect_rate=e["sample_rate"]))
                for s in e["stems"]
            ]
            self._cache[track_id] = StemTrack(
                track_id=track_id, stems=stems, sample_rate=e["sample_rate"])
        return self._cache[track_id]

    def clips(self, track_id, window=10.0, stride=1.0):
        e = self.track_entries[track_id]
        return chunk_track(e["duration"], window, stride, track_id)

    def stem_classes(self, track_id):
        return [s["class"] for s in self.track_entries[track_id]["stems"]]
