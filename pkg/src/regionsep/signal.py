"""Audio buffers, STFT/iSTFT, level measurement, and the SNR metric."""

from dataclasses import dataclass, field

import numpy as np
from scipy.io import wavfile
from scipy.signal import get_window

DBRMS_FLOOR = -120.0
WSUM_FLOOR = 1e-2  # overlap-add normalization floor for edge samples
SNR_XI = 1e-6


@dataclass(frozen=True)
class StftConfig:
    fft_size: int = 1024
    hop: int = 256
    window: str = "hann"

    def __post_init__(self):
        if self.hop <= 0 or self.fft_size <= 0:
            raise ValueError("fft_size and hop must be positive")
        if self.hop > self.fft_size:
            raise ValueError("hop must not exceed fft_size")

    @property
    def num_bins(self):
        return self.fft_size // 2 + 1

    def window_array(self):
        # periodic window: COLA-exact at hop = fft_size / 2^k
        return get_window(self.window, self.fft_size, fftbins=True)


@dataclass(frozen=True)
class AudioChunk:
    samples: np.ndarray  # C x N, linear amplitude
    sample_rate: int

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim == 1:
            s = s[None, :]
        if s.ndim != 2 or s.shape[0] < 1 or s.shape[1] < 1:
            raise ValueError("samples must be a C x N matrix with C, N >= 1")
        if not np.all(np.isfinite(s)):
            raise ValueError("samples must be finite")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        object.__setattr__(self, "samples", s)

    @property
    def num_channels(self):
        return self.samples.shape[0]

    @property
    def num_samples(self):
        return self.samples.shape[1]

    @property
    def duration(self):
        return self.num_samples / self.sample_rate


@dataclass(frozen=True)
class Spectrogram:
    bins: np.ndarray  # complex C x F x T
    config: StftConfig = field(default_factory=StftConfig)

    def __post_init__(self):
        b = np.asarray(self.bins, dtype=np.complex128)
        if b.ndim != 3:
            raise ValueError("bins must be a C x F x T tensor")
        if b.shape[1] != self.config.num_bins:
            raise ValueError(
                f"expected F = {self.config.num_bins} bins, got {b.shape[1]}"
            )
        if not np.all(np.isfinite(b)):
            raise ValueError("bins must be finite")
        object.__setattr__(self, "bins", b)


def num_frames(n_samples, cfg):
    """Frame count for un-centered framing starting at sample 0."""
    if n_samples < cfg.fft_size:
        raise ValueError(
            f"chunk too short: {n_samples} samples < fft_size {cfg.fft_size}"
        )
    return (n_samples - cfg.fft_size) // cfg.hop + 1


def stft(audio: AudioChunk, cfg: StftConfig = StftConfig()) -> Spectrogram:
    """Short-time Fourier transform, frames starting at sample 0, no centering."""
    x = audio.samples
    T = num_frames(x.shape[1], cfg)
    win = cfg.window_array()
    idx = np.arange(cfg.fft_size)[None, :] + cfg.hop * np.arange(T)[:, None]
    frames = x[:, idx] * win  # C x T x fft_size
    bins = np.fft.rfft(frames, axis=2)  # C x T x F
    return Spectrogram(bins=np.transpose(bins, (0, 2, 1)), config=cfg)


def istft(spec: Spectrogram, cfg: StftConfig = None, out_len: int = None) -> "np.ndarray":
    """Inverse STFT by windowed overlap-add with per-sample window-power
    normalization; exact inverse of stft on all covered samples.

    Returns a C x out_len sample array (not an AudioChunk: the sample rate
    is not part of the spectrogram)."""
    cfg = cfg or spec.config
    if spec.bins.shape[1] != cfg.num_bins:
        raise ValueError("spectrogram shape incompatible with config")
    C, F, T = spec.bins.shape
    win = cfg.window_array()
    frames = np.fft.irfft(spec.bins.transpose(0, 2, 1), n=cfg.fft_size, axis=2)
    n_cov = (T - 1) * cfg.hop + cfg.fft_size
    if out_len is None:
        out_len = n_cov
    y = np.zeros((C, n_cov))
    wsum = np.zeros(n_cov)
    for t in range(T):
        sl = slice(t * cfg.hop, t * cfg.hop + cfg.fft_size)
        y[:, sl] += frames[:, t] * win
        wsum[sl] += win**2
    # the floor keeps the first/last partially-covered samples from being
    # amplified by 1/wsum; interior wsum is O(1) so exactness is unaffected
    y /= np.maximum(wsum, WSUM_FLOOR)
    if out_len <= n_cov:
        return y[:, :out_len]
    return np.pad(y, ((0, 0), (0, out_len - n_cov)))


def dbrms(audio) -> float:
    """RMS level in dB; silence returns the floor value."""
    x = audio.samples if isinstance(audio, AudioChunk) else np.asarray(audio)
    msq = float(np.mean(x**2))
    if msq <= 10.0 ** (DBRMS_FLOOR / 10.0):
        return DBRMS_FLOOR
    return 10.0 * np.log10(msq)


def snr(est, ref, xi: float = SNR_XI) -> float:
    """10 log10((||y||^2 + xi) / (||y_hat - y||^2 + xi)); silent estimate -> 0 dB."""
    e = est.samples if isinstance(est, AudioChunk) else np.asarray(est)
    r = ref.samples if isinstance(ref, AudioChunk) else np.asarray(ref)
    if e.shape != r.shape:
        raise ValueError(f"shape mismatch: {e.shape} vs {r.shape}")
    num = float(np.sum(r**2)) + xi
    den = float(np.sum((e - r) ** 2)) + xi
    return 10.0 * np.log10(num / den)


def write_wav(path, audio: AudioChunk):
    """32-bit IEEE-float PCM WAV, channels as columns."""
    data = audio.samples.T.astype(np.float32)
    if data.shape[1] == 1:
        data = data[:, 0]
    wavfile.write(path, audio.sample_rate, data)


def read_wav(path, expect_rate: int = None) -> AudioChunk:
    rate, data = wavfile.read(path)
    if expect_rate is not None and rate != expect_rate:
        raise ValueError(f"{path}: sample rate {rate} != expected {expect_rate}")
    if data.ndim == 1:
        data = data[:, None]
    if data.shape[1] > 2:
        raise ValueError(f"{path}: only 1-2 channels supported, got {data.shape[1]}")
    if data.dtype != np.float32:
        raise ValueError(f"{path}: expected float32 PCM, got {data.dtype}")
    return AudioChunk(samples=data.T.astype(np.float64), sample_rate=int(rate))
