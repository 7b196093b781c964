"""Training objective: multi-domain L1SNR reconstruction, level-matching
regularization with adaptive weight, and the stop-gradient total loss."""

from dataclasses import dataclass

import torch

from .signal import StftConfig
from .torchsig import dbrms_t, stft_t


@dataclass(frozen=True)
class LossConfig:
    eps_l1snr: float = 1e-3
    lambda0: float = 0.01
    delta_lambda: float = 0.1
    l_min_db: float = -48.0

    def __post_init__(self):
        if self.eps_l1snr <= 0:
            raise ValueError("eps_l1snr must be positive")
        if self.lambda0 < 0 or self.delta_lambda < 0:
            raise ValueError("lambda0 and delta_lambda must be >= 0")


@dataclass(frozen=True)
class LossReport:
    recon: float
    reg: float
    weight: float
    eta: int
    total: float


def _as_tensor(x):
    if isinstance(x, torch.Tensor):
        return x
    return torch.as_tensor(x, dtype=torch.float64)


def l1snr(est, ref, eps: float = 1e-3) -> torch.Tensor:
    """10 log10((||vec(est - ref)||_1 + eps) / (||vec(ref)||_1 + eps)); lower is better."""
    est, ref = _as_tensor(est), _as_tensor(ref)
    if est.shape != ref.shape:
        raise ValueError(f"shape mismatch: {tuple(est.shape)} vs {tuple(ref.shape)}")
    num = torch.sum(torch.abs(est - ref)) + eps
    den = torch.sum(torch.abs(ref)) + eps
    return 10.0 * torch.log10(num / den)


def reconstruction_loss(est_audio, ref_audio, est_spec, ref_spec,
                        eps: float = 1e-3) -> torch.Tensor:
    """Sum of time-domain, real-spectral, and imaginary-spectral L1SNR terms."""
    return (l1snr(est_audio, ref_audio, eps)
            + l1snr(est_spec.real, ref_spec.real, eps)
            + l1snr(est_spec.imag, ref_spec.imag, eps))


def level_regularizer(est, ref):
    """|dBRMS(est) - dBRMS(ref)| with the floor policy; returns (R, L, L_hat)."""
    est, ref = _as_tensor(est), _as_tensor(ref)
    L = dbrms_t(ref)
    L_hat = dbrms_t(est)
    return torch.abs(L_hat - L), L, L_hat


def adaptive_weight(L, L_hat, cfg: LossConfig):
    """lambda = lambda0 + eta * dlambda * clamp01(|L_hat - L| / (L - L_min));
    eta = 1 iff the reference is louder than both the estimate and the floor."""
    L = float(L)
    L_hat = float(L_hat)
    eta = 1 if L > max(L_hat, cfg.l_min_db) else 0
    lam = cfg.lambda0
    if eta:
        # eta = 1 implies L > L_min, so the denominator is strictly positive
        frac = min(1.0, max(0.0, abs(L_hat - L) / (L - cfg.l_min_db)))
        lam += cfg.delta_lambda * frac
    return lam, eta


def total_loss(est, ref, stft_cfg: StftConfig = StftConfig(),
               cfg: LossConfig = LossConfig()):
    """J = L + sg[lambda] * R.

    The adaptive weight is computed from detached levels, so no gradient
    flows through lambda's dependence on the estimate.

    Returns (scalar tensor for backward, LossReport)."""
    est, ref = _as_tensor(est), _as_tensor(ref)
    est_spec = stft_t(est, stft_cfg)
    ref_spec = stft_t(ref, stft_cfg)
    recon = reconstruction_loss(est, ref, est_spec, ref_spec, cfg.eps_l1snr)
    reg, L, L_hat = level_regularizer(est, ref)
    lam, eta = adaptive_weight(L.detach(), L_hat.detach(), cfg)
    total = recon + lam * reg
    report = LossReport(
        recon=float(recon.detach()), reg=float(reg.detach()), weight=lam,
        eta=eta, total=float(total.detach()),
    )
    return total, report
