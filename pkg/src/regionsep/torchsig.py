"""Differentiable (torch) mirrors of the numpy signal ops.

Conventions match signal.py exactly: un-centered frames starting at sample 0,
periodic window, overlap-add inverse with per-sample window-power
normalization. Everything runs in float64 on CPU."""

import numpy as np
import torch

from .signal import DBRMS_FLOOR, WSUM_FLOOR, StftConfig

_MSQ_FLOOR = 10.0 ** (DBRMS_FLOOR / 10.0)


def window_tensor(cfg: StftConfig, dtype=torch.float64) -> torch.Tensor:
    return torch.from_numpy(cfg.window_array().astype(np.float64)).to(dtype)


def stft_t(x: torch.Tensor, cfg: StftConfig) -> torch.Tensor:
    """C x N -> complex C x F x T."""
    n = x.shape[-1]
    if n < cfg.fft_size:
        raise ValueError(f"chunk too short: {n} samples < fft_size {cfg.fft_size}")
    frames = x.unfold(-1, cfg.fft_size, cfg.hop)  # C x T x fft_size
    spec = torch.fft.rfft(frames * window_tensor(cfg, x.dtype), dim=-1)
    return spec.transpose(-2, -1)  # C x F x T


def istft_t(spec: torch.Tensor, cfg: StftConfig, out_len: int) -> torch.Tensor:
    """Complex C x F x T -> C x out_len."""
    C, F, T = spec.shape
    win = window_tensor(cfg, torch.float32 if spec.dtype == torch.complex64
                        else torch.float64)
    frames = torch.fft.irfft(spec.transpose(-2, -1), n=cfg.fft_size, dim=-1)
    frames = frames * win  # C x T x fft_size
    n_cov = (T - 1) * cfg.hop + cfg.fft_size
    # scatter-add overlapping frames
    idx = (torch.arange(cfg.fft_size)[None, :]
           + cfg.hop * torch.arange(T)[:, None]).reshape(-1)
    y = torch.zeros(C, n_cov, dtype=frames.dtype)
    y = y.index_add(1, idx, frames.reshape(C, -1))
    wsum = torch.zeros(n_cov, dtype=win.dtype)
    wsum = wsum.index_add(0, idx, (win**2).repeat(T))
    y = y / torch.clamp(wsum, min=WSUM_FLOOR)
    if out_len <= n_cov:
        return y[:, :out_len]
    return torch.nn.functional.pad(y, (0, out_len - n_cov))


def dbrms_t(x: torch.Tensor) -> torch.Tensor:
    """RMS level in dB with the -120 dB silence floor."""
    msq = torch.mean(x**2)
    return 10.0 * torch.log10(torch.clamp(msq, min=_MSQ_FLOOR))
