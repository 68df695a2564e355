"""Training objectives as differentiable torch functions.

Signals are ``[batch, time]`` tensors (1-D tensors, numpy arrays and
:class:`~refinevoc.signal_core.Waveform` objects are promoted). The STFT and
mel projection mirror :mod:`refinevoc.signal_core` exactly so the numpy path
can serve as an oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch

from .signal_core import LOG_FLOOR, MelParamSet, Waveform, mel_filterbank, padded_window

ScoreSet = Sequence[torch.Tensor]

DEFAULT_LOSS_SETS = (
    MelParamSet(fft_size=512, hop_size=128, win_size=512, n_mels=32),
    MelParamSet(fft_size=1024, hop_size=256, win_size=1024, n_mels=64),
    MelParamSet(fft_size=2048, hop_size=512, win_size=2048, n_mels=128),
    MelParamSet(fft_size=4096, hop_size=1024, win_size=4096, n_mels=128),
    MelParamSet(fft_size=1024, hop_size=120, win_size=600, n_mels=64),
    MelParamSet(fft_size=512, hop_size=50, win_size=240, n_mels=32),
)


@dataclass(frozen=True)
class MelLossConfig:
    param_sets: tuple[MelParamSet, ...] = DEFAULT_LOSS_SETS
    log_floor: float = LOG_FLOOR

    def __post_init__(self):
        object.__setattr__(self, "param_sets", tuple(self.param_sets))
        if not self.param_sets:
            raise ValueError("need at least one mel parameter set")
        if not self.log_floor > 0:
            raise ValueError("log_floor must be positive")


@dataclass(frozen=True)
class EnvelopeConfig:
    win_size: int = 512
    hop_size: int = 256

    def __post_init__(self):
        if self.win_size <= 0 or self.hop_size <= 0:
            raise ValueError("envelope win_size and hop_size must be positive")


@dataclass(frozen=True)
class LossWeights:
    lambda_mel: float = 45.0

    def __post_init__(self):
        if not self.lambda_mel >= 0:
            raise ValueError(f"lambda_mel must be non-negative, got {self.lambda_mel}")


def as_batch(x, dtype=None) -> torch.Tensor:
    if isinstance(x, Waveform):
        x = x.samples
    if isinstance(x, np.ndarray):
        x = torch.from_numpy(np.array(x, dtype=np.float64))
    if dtype is not None:
        x = x.to(dtype)
    if x.dim() == 1:
        x = x.unsqueeze(0)
    elif x.dim() == 3 and x.shape[1] == 1:
        x = x.squeeze(1)
    if x.dim() != 2:
        raise ValueError(f"expected a [batch, time] signal, got shape {tuple(x.shape)}")
    return x


def _rate_of(*signals, sample_rate=None) -> int:
    for s in signals:
        if isinstance(s, Waveform):
            if sample_rate is not None and sample_rate != s.sample_rate:
                raise ValueError(f"sample rates differ: {sample_rate} vs {s.sample_rate}")
            sample_rate = s.sample_rate
    if sample_rate is None:
        raise ValueError("sample_rate is required for tensor inputs")
    return int(sample_rate)


def _check_pair(y: torch.Tensor, y_hat: torch.Tensor) -> None:
    if y.shape != y_hat.shape:
        raise ValueError(f"signal shapes differ: {tuple(y.shape)} vs {tuple(y_hat.shape)}")


def _safe_sqrt(x: torch.Tensor) -> torch.Tensor:
    positive = x > 0
    return torch.where(positive, torch.sqrt(torch.where(positive, x, torch.ones_like(x))), torch.zeros_like(x))


def stft_magnitude(x: torch.Tensor, fft_size: int, hop_size: int, win_size: int) -> torch.Tensor:
    """``[batch, time] -> [batch, bins, frames]``, matching the numpy STFT."""
    x = as_batch(x)
    if x.shape[-1] <= fft_size // 2:
        raise ValueError(
            f"signal of {x.shape[-1]} samples is too short for fft_size={fft_size} "
            f"(needs more than {fft_size // 2})"
        )
    params = MelParamSet(fft_size=fft_size, win_size=win_size, hop_size=hop_size)
    window = torch.as_tensor(padded_window(params), dtype=x.dtype, device=x.device)
    spec = torch.stft(x, fft_size, hop_size, win_length=fft_size, window=window,
                      center=True, pad_mode="reflect", return_complex=True)
    return _safe_sqrt(spec.real**2 + spec.imag**2)


def log_mel(x: torch.Tensor, params: MelParamSet, sample_rate: int, log_floor: float = LOG_FLOOR) -> torch.Tensor:
    x = as_batch(x)
    mag = stft_magnitude(x, params.fft_size, params.hop_size, params.win_size)
    fb = torch.tensor(mel_filterbank(params, sample_rate), dtype=x.dtype, device=x.device)
    return torch.log(torch.clamp_min(fb @ mag, log_floor))


def multi_mel_loss(y, y_hat, cfg: MelLossConfig = MelLossConfig(), sample_rate: int | None = None) -> torch.Tensor:
    """Mean over parameter sets of the log-mel mean squared error."""
    rate = _rate_of(y, y_hat, sample_rate=sample_rate)
    y, y_hat = as_batch(y), as_batch(y_hat)
    _check_pair(y, y_hat)
    total = 0.0
    for params in cfg.param_sets:
        diff = log_mel(y, params, rate, cfg.log_floor) - log_mel(y_hat, params, rate, cfg.log_floor)
        total = total + torch.mean(diff**2)
    return total / len(cfg.param_sets)


def max_envelope(x: torch.Tensor, win_size: int, hop_size: int) -> torch.Tensor:
    """Max pool over ``[t*hop, t*hop + win)`` for every frame start inside the signal."""
    x = as_batch(x)
    n = x.shape[-1]
    n_frames = -(-n // hop_size)
    extra = max((n_frames - 1) * hop_size + win_size - n, 0)
    padded = torch.nn.functional.pad(x, (0, extra), value=float("-inf"))
    return torch.nn.functional.max_pool1d(padded.unsqueeze(1), win_size, hop_size).squeeze(1)[..., :n_frames]


def envelope_loss(y, y_hat, cfg: EnvelopeConfig = EnvelopeConfig()) -> torch.Tensor:
    """Frame-mean absolute difference of the upper plus the polarity-reversed envelopes."""
    y, y_hat = as_batch(y), as_batch(y_hat)
    _check_pair(y, y_hat)
    upper = torch.mean(torch.abs(max_envelope(y, cfg.win_size, cfg.hop_size)
                                 - max_envelope(y_hat, cfg.win_size, cfg.hop_size)))
    lower = torch.mean(torch.abs(max_envelope(-y, cfg.win_size, cfg.hop_size)
                                 - max_envelope(-y_hat, cfg.win_size, cfg.hop_size)))
    return upper + lower


def _item(x: torch.Tensor) -> float:
    return float(x.detach())


def softplus(x: torch.Tensor) -> torch.Tensor:
    """``log(1 + e^x)`` without overflow."""
    return torch.clamp_min(x, 0) + torch.log1p(torch.exp(-torch.abs(x)))


def _group_mean(scores: ScoreSet, sign: float) -> torch.Tensor:
    if len(scores) == 0:
        raise ValueError("empty score set")
    return sum(torch.mean(softplus(sign * s)) for s in scores) / len(scores)


def adversarial_g_loss(fake_mpd: ScoreSet, fake_mrd: ScoreSet) -> torch.Tensor:
    return _group_mean(fake_mpd, -1.0) + _group_mean(fake_mrd, -1.0)


def _family_loss(real: ScoreSet, fake: ScoreSet, name: str) -> torch.Tensor:
    if len(real) != len(fake):
        raise ValueError(f"{name}: {len(real)} real score maps but {len(fake)} fake ones")
    if len(real) == 0:
        raise ValueError(f"{name}: empty score set")
    terms = [torch.mean(softplus(-r)) + torch.mean(softplus(f)) for r, f in zip(real, fake)]
    return sum(terms) / len(terms)


def discriminator_loss(real_mpd: ScoreSet, fake_mpd: ScoreSet, real_mrd: ScoreSet,
                       fake_mrd: ScoreSet) -> tuple[torch.Tensor, dict]:
    loss_mpd = _family_loss(real_mpd, fake_mpd, "MPD")
    loss_mrd = _family_loss(real_mrd, fake_mrd, "MRD")
    total = loss_mpd + loss_mrd
    return total, {"loss_d": _item(total), "loss_mpd": _item(loss_mpd), "loss_mrd": _item(loss_mrd)}


def generator_total_loss(y, y_hat, fake_scores: tuple[ScoreSet, ScoreSet],
                         weights: LossWeights = LossWeights(), mel_cfg: MelLossConfig = MelLossConfig(),
                         env_cfg: EnvelopeConfig = EnvelopeConfig(),
                         sample_rate: int | None = None) -> tuple[torch.Tensor, dict]:
    """Weighted mel loss + envelope loss + adversarial loss over both discriminator families."""
    mel = multi_mel_loss(y, y_hat, mel_cfg, sample_rate)
    env = envelope_loss(y, y_hat, env_cfg)
    adv = adversarial_g_loss(*fake_scores)
    weighted_mel = weights.lambda_mel * mel
    total = weighted_mel + env + adv
    metrics = {
        "loss_total": _item(total),
        "loss_mel": _item(weighted_mel),
        "loss_mel_raw": _item(mel),
        "loss_env": _item(env),
        "loss_adv_g": _item(adv),
    }
    return total, metrics
