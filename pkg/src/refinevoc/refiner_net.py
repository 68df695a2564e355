"""Refine generator and the two discriminator families.

The generator is a 1-D UNet: strided convolutions take the speech template
down to the mel frame rate, a fusion convolution mixes in the mel
spectrogram, and transposed convolutions bring it back up. Each decoder level
concatenates the mirrored encoder output, applies a convolution, then
averages a bank of parallel dilated ResBlocks.

Discriminator channel plans (kept small for desk-scale training):

=========  ============================  =====================================
family     layers                        channels
=========  ============================  =====================================
MPD        5 x Conv2d (5,1), stride 3/1  ``mpd_channels`` (16, 32, 64, 64, 64)
           + Conv2d (3,1) -> 1
MRD        4 x Conv2d (3,9), stride 1x2  ``mrd_channels`` (16, 16, 16, 16)
           + Conv2d (3,3) -> 1
=========  ============================  =====================================
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F
from torch.nn.utils.parametrizations import weight_norm

from .losses import stft_magnitude
from .signal_core import MelSpectrogram, Waveform


@dataclass(frozen=True)
class GeneratorConfig:
    down_rates: tuple[int, ...] = (2, 2, 8, 8)
    up_rates: tuple[int, ...] = (8, 8, 2, 2)
    base_channels: int = 16
    decoder_kernels: tuple[int, ...] = (3, 7, 11)
    encoder_kernel: int = 7
    dilations: tuple[int, ...] = (1, 3, 5)
    n_mels: int = 128
    leaky_slope: float = 0.1
    hop_size: int = 256

    def __post_init__(self):
        for name in ("down_rates", "up_rates", "decoder_kernels", "dilations"):
            object.__setattr__(self, name, tuple(int(v) for v in getattr(self, name)))
        if not self.down_rates or any(r < 1 for r in self.down_rates + self.up_rates):
            raise ValueError("resampling rates must be positive integers")
        down, up = math.prod(self.down_rates), math.prod(self.up_rates)
        if down != self.hop_size or up != self.hop_size:
            raise ValueError(
                f"rate products must equal hop_size={self.hop_size}: "
                f"down_rates give {down}, up_rates give {up}"
            )
        if self.up_rates != self.down_rates[::-1]:
            raise ValueError("up_rates must mirror down_rates so skip connections line up")
        kernels = self.decoder_kernels + (self.encoder_kernel,)
        if any(k < 1 or k % 2 == 0 for k in kernels):
            raise ValueError(f"ResBlock kernels must be odd, got {kernels}")
        if self.base_channels < 1 or self.n_mels < 1:
            raise ValueError("base_channels and n_mels must be positive")

    @classmethod
    def toy(cls, n_mels: int = 8) -> "GeneratorConfig":
        return cls(down_rates=(2, 2), up_rates=(2, 2), base_channels=4, n_mels=n_mels, hop_size=4)


@dataclass(frozen=True)
class DiscriminatorConfig:
    mpd_periods: tuple[int, ...] = (2, 3, 5, 7, 11)
    mrd_param_sets: tuple[tuple[int, int, int], ...] = ((1024, 120, 600), (2048, 240, 1200), (512, 50, 240))
    mpd_channels: tuple[int, ...] = (16, 32, 64, 64, 64)
    mrd_channels: tuple[int, ...] = (16, 16, 16, 16)
    leaky_slope: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "mpd_periods", tuple(int(p) for p in self.mpd_periods))
        object.__setattr__(self, "mrd_param_sets", tuple(tuple(int(v) for v in s) for s in self.mrd_param_sets))
        object.__setattr__(self, "mpd_channels", tuple(int(c) for c in self.mpd_channels))
        object.__setattr__(self, "mrd_channels", tuple(int(c) for c in self.mrd_channels))
        if len(set(self.mpd_periods)) != len(self.mpd_periods) or min(self.mpd_periods, default=0) < 2:
            raise ValueError(f"MPD periods must be distinct and >= 2, got {self.mpd_periods}")
        for triple in self.mrd_param_sets:
            if len(triple) != 3:
                raise ValueError(f"MRD parameter sets are (fft, hop, win) triples, got {triple}")
            fft, hop, win = triple
            if not (0 < hop <= win <= fft):
                raise ValueError(f"invalid MRD STFT parameters (fft={fft}, hop={hop}, win={win})")
        if len(self.mpd_channels) != 5 or len(self.mrd_channels) != 4:
            raise ValueError("MPD needs 5 channel widths and MRD needs 4")


_recorders: list["ActivationRecorder"] = []


class ActivationRecorder:
    """Context manager logging which side of zero every LeakyReLU input falls on.

    Finite-difference checks use it to skip perturbations that push a
    pre-activation across the kink, where the central difference is not a
    derivative estimate.
    """

    def __init__(self):
        self._masks: list[torch.Tensor] = []

    def __enter__(self) -> "ActivationRecorder":
        _recorders.append(self)
        return self

    def __exit__(self, *exc):
        _recorders.remove(self)

    def take(self) -> bytes:
        """Sign pattern recorded since the last call, then clear it."""
        pattern = b"".join(m.numpy().tobytes() for m in self._masks)
        self._masks = []
        return pattern


def _leaky_relu(x: torch.Tensor, slope: float) -> torch.Tensor:
    for rec in _recorders:
        rec._masks.append(x.detach() > 0)
    return F.leaky_relu(x, slope)


def _same_padding(kernel: int, dilation: int = 1) -> int:
    return dilation * (kernel - 1) // 2


class ResBlock(nn.Module):
    """Three residual sub-blocks: LeakyReLU, dilated conv, LeakyReLU, conv."""

    def __init__(self, channels: int, kernel: int, dilations=(1, 3, 5), slope: float = 0.1):
        super().__init__()
        self.slope = slope
        self.dilated = nn.ModuleList(
            weight_norm(nn.Conv1d(channels, channels, kernel, dilation=d, padding=_same_padding(kernel, d)))
            for d in dilations
        )
        self.plain = nn.ModuleList(
            weight_norm(nn.Conv1d(channels, channels, kernel, padding=_same_padding(kernel)))
            for _ in dilations
        )

    def forward(self, x):
        for conv1, conv2 in zip(self.dilated, self.plain):
            h = conv1(_leaky_relu(x, self.slope))
            x = x + conv2(_leaky_relu(h, self.slope))
        return x


class Generator(nn.Module):
    def __init__(self, cfg: GeneratorConfig):
        super().__init__()
        self.cfg = cfg
        slope = cfg.leaky_slope
        widths = [cfg.base_channels * 2**i for i in range(len(cfg.down_rates) + 1)]
        self.input_conv = weight_norm(nn.Conv1d(1, widths[0], 7, padding=3))

        self.down = nn.ModuleList()
        self.encoder = nn.ModuleList()
        for i, rate in enumerate(cfg.down_rates):
            self.down.append(weight_norm(nn.Conv1d(widths[i], widths[i + 1], 2 * rate, stride=rate)))
            self.encoder.append(ResBlock(widths[i + 1], cfg.encoder_kernel, cfg.dilations, slope))

        self.mel_proj = weight_norm(nn.Conv1d(cfg.n_mels, widths[-1], 1))
        self.mel_fuse = weight_norm(nn.Conv1d(2 * widths[-1], widths[-1], 7, padding=3))

        self.up = nn.ModuleList()
        self.skip_fuse = nn.ModuleList()
        self.decoder = nn.ModuleList()
        depth = len(cfg.up_rates)
        for j, rate in enumerate(cfg.up_rates):
            c_in, c_out = widths[depth - j], widths[depth - j - 1]
            self.up.append(weight_norm(nn.ConvTranspose1d(
                c_in, c_out, 2 * rate, stride=rate, padding=(rate + 1) // 2, output_padding=rate % 2)))
            self.skip_fuse.append(weight_norm(nn.Conv1d(2 * c_out, c_out, 7, padding=3)))
            self.decoder.append(nn.ModuleList(
                ResBlock(c_out, k, cfg.dilations, slope) for k in cfg.decoder_kernels))
        self.output_conv = weight_norm(nn.Conv1d(widths[0], 1, 7, padding=3))

    def forward(self, template: torch.Tensor, mel: torch.Tensor) -> torch.Tensor:
        """``template [B, 1, T]``, ``mel [B, n_mels, T / hop]`` -> ``[B, 1, T]``."""
        slope = self.cfg.leaky_slope
        x = self.input_conv(template)
        skips = [x]
        for conv, block in zip(self.down, self.encoder):
            rate = conv.stride[0]
            x = conv(F.pad(_leaky_relu(x, slope), (rate // 2, rate - rate // 2)))
            x = block(x)
            skips.append(x)

        x = self.mel_fuse(torch.cat([x, self.mel_proj(mel)], dim=1))

        depth = len(self.up)
        for j, (conv, fuse, bank) in enumerate(zip(self.up, self.skip_fuse, self.decoder)):
            x = conv(_leaky_relu(x, slope))
            x = fuse(torch.cat([x, skips[depth - 1 - j]], dim=1))
            x = sum(block(x) for block in bank) / len(bank)
        return torch.tanh(self.output_conv(_leaky_relu(x, slope)))


def build_generator(cfg: GeneratorConfig, seed: int = 0) -> Generator:
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        return Generator(cfg)


def count_parameters(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())


def decoder_receptive_field(cfg: GeneratorConfig) -> int:
    """Samples of decoder input history that influence one output sample.

    Walks the decoder from the output back to the mel fusion layer, in units
    of output samples.
    """
    field = 1 + (7 - 1)  # output conv
    jump = 1
    resblock = max(
        sum((k - 1) * d + (k - 1) for d in cfg.dilations) for k in cfg.decoder_kernels
    )
    for rate in reversed(cfg.up_rates):
        field += resblock * jump
        field += (7 - 1) * jump  # skip fusion conv
        field += (2 - 1) * jump * rate  # transposed conv: each output sees two inputs
        jump *= rate
    return field


def generator_forward(gen: Generator, template, mel: MelSpectrogram) -> Waveform:
    """Run the generator on one template / mel pair.

    ``mel`` may carry the extra centre-padded frame (``T / hop + 1`` frames);
    it is dropped.
    """
    samples = np.asarray(getattr(template, "samples", template), dtype=np.float64)
    hop = gen.cfg.hop_size
    n = samples.shape[0]
    if n % hop:
        raise ValueError(f"template length {n} is not a multiple of hop_size={hop}")
    frames = n // hop
    log_mels = np.asarray(mel.log_mels)
    if log_mels.shape[1] == frames + 1:
        log_mels = log_mels[:, :frames]
    if log_mels.shape != (gen.cfg.n_mels, frames):
        raise ValueError(
            f"mel must be [{gen.cfg.n_mels}, {frames}] (or {frames + 1} frames) "
            f"for a {n}-sample template, got {list(log_mels.shape)}"
        )
    dtype = next(gen.parameters()).dtype
    with torch.no_grad():
        out = gen(torch.tensor(samples, dtype=dtype)[None, None],
                  torch.tensor(log_mels, dtype=dtype)[None])
    rate = getattr(template, "sample_rate", mel.sample_rate)
    return Waveform(out[0, 0].double().numpy(), rate)


class PeriodDiscriminator(nn.Module):
    def __init__(self, period: int, channels, slope: float = 0.1):
        super().__init__()
        self.period = period
        self.slope = slope
        widths = (1,) + tuple(channels)
        strides = (3, 3, 3, 3, 1)
        self.convs = nn.ModuleList(
            weight_norm(nn.Conv2d(widths[i], widths[i + 1], (5, 1), (strides[i], 1), padding=(2, 0)))
            for i in range(5)
        )
        self.post = weight_norm(nn.Conv2d(widths[-1], 1, (3, 1), padding=(1, 0)))

    def forward(self, x):
        """``[B, T] -> [B, 1, rows, period]`` score map."""
        batch, n = x.shape
        if n % self.period:
            extra = self.period - n % self.period
            mode = "reflect" if extra < n else "constant"
            x = F.pad(x.unsqueeze(1), (0, extra), mode=mode).squeeze(1)
        x = x.reshape(batch, 1, -1, self.period)
        for conv in self.convs:
            x = _leaky_relu(conv(x), self.slope)
        return self.post(x)


class ResolutionDiscriminator(nn.Module):
    def __init__(self, fft_size: int, hop_size: int, win_size: int, channels, slope: float = 0.1):
        super().__init__()
        self.stft = (fft_size, hop_size, win_size)
        self.slope = slope
        widths = (1,) + tuple(channels)
        self.convs = nn.ModuleList(
            weight_norm(nn.Conv2d(widths[i], widths[i + 1], (3, 9), (1, 2), padding=(1, 4)))
            for i in range(len(channels))
        )
        self.post = weight_norm(nn.Conv2d(widths[-1], 1, (3, 3), padding=(1, 1)))

    def forward(self, x):
        """``[B, T] -> [B, 1, frames, bins']`` score map over the linear spectrogram."""
        spec = stft_magnitude(x, *self.stft).transpose(1, 2).unsqueeze(1)
        for conv in self.convs:
            spec = _leaky_relu(conv(spec), self.slope)
        return self.post(spec)


class MultiPeriodDiscriminator(nn.Module):
    def __init__(self, cfg: DiscriminatorConfig):
        super().__init__()
        self.subs = nn.ModuleList(
            PeriodDiscriminator(p, cfg.mpd_channels, cfg.leaky_slope) for p in cfg.mpd_periods)

    def forward(self, wave: torch.Tensor) -> list[torch.Tensor]:
        wave = _as_2d(wave)
        longest = max(sub.period for sub in self.subs)
        if wave.shape[-1] < longest:
            raise ValueError(f"MPD needs at least {longest} samples, got {wave.shape[-1]}")
        return [sub(wave) for sub in self.subs]


class MultiResolutionDiscriminator(nn.Module):
    def __init__(self, cfg: DiscriminatorConfig):
        super().__init__()
        self.subs = nn.ModuleList(
            ResolutionDiscriminator(*triple, cfg.mrd_channels, cfg.leaky_slope) for triple in cfg.mrd_param_sets)

    def forward(self, wave: torch.Tensor) -> list[torch.Tensor]:
        wave = _as_2d(wave)
        largest = max(sub.stft[0] for sub in self.subs)
        if wave.shape[-1] <= largest // 2:
            raise ValueError(f"MRD needs more than {largest // 2} samples, got {wave.shape[-1]}")
        return [sub(wave) for sub in self.subs]


class Discriminators(nn.Module):
    """Both discriminator families; one optimizer drives them together."""

    def __init__(self, cfg: DiscriminatorConfig):
        super().__init__()
        self.cfg = cfg
        self.mpd = MultiPeriodDiscriminator(cfg)
        self.mrd = MultiResolutionDiscriminator(cfg)

    def forward(self, wave):
        return self.mpd(wave), self.mrd(wave)


def build_discriminators(cfg: DiscriminatorConfig, seed: int = 0) -> Discriminators:
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        return Discriminators(cfg)


def _as_2d(wave) -> torch.Tensor:
    if isinstance(wave, Waveform):
        wave = torch.tensor(wave.samples)
    if wave.dim() == 3:
        wave = wave.squeeze(1)
    if wave.dim() == 1:
        wave = wave.unsqueeze(0)
    return wave


def mpd_forward(cfg: DiscriminatorConfig, wave, discriminators: Discriminators | None = None,
                seed: int = 0) -> list[torch.Tensor]:
    """Score maps from every period sub-discriminator (freshly built from ``cfg`` unless given)."""
    disc = discriminators if discriminators is not None else build_discriminators(cfg, seed)
    wave = _as_2d(wave).to(next(disc.parameters()).dtype)
    return disc.mpd(wave)


def mrd_forward(cfg: DiscriminatorConfig, wave, discriminators: Discriminators | None = None,
                seed: int = 0) -> list[torch.Tensor]:
    disc = discriminators if discriminators is not None else build_discriminators(cfg, seed)
    wave = _as_2d(wave).to(next(disc.parameters()).dtype)
    return disc.mrd(wave)
