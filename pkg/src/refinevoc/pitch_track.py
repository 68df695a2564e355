"""Frame-rate F0 estimation with a hard voiced/unvoiced decision.

Two autocorrelation trackers play the roles of a conservative coarse
estimator and a permissive fine estimator. :func:`fuse_pitch` combines them
with the smoothed derivative of the zero-crossing rate: the fine estimate is
kept everywhere except where the ZCR is rising (the signal is turning noisy)
and the coarse estimator sees no voicing.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .signal_core import (
    FrameCurve,
    Waveform,
    discrete_derivative,
    frame_signal,
    gaussian_smooth,
    zero_crossing_rate,
)

F_FLOOR = 40.0
F_CEIL = 1600.0
RMS_GATE = 1e-3
COARSE_THRESHOLD = 0.5
FINE_THRESHOLD = 0.3
# candidate peaks within this fraction of the best one win if they have a shorter lag
OCTAVE_TOLERANCE = 0.85


@dataclass(frozen=True)
class PitchCurve:
    """F0 per frame in Hz; 0 marks an unvoiced frame. Frame ``t`` is centred on ``t * hop_size``."""

    f0: np.ndarray
    hop_size: int
    sample_rate: int

    def __post_init__(self):
        f0 = np.array(self.f0, dtype=np.float64)
        if f0.ndim != 1:
            raise ValueError("pitch curve must be 1-D")
        if not np.all(np.isfinite(f0)):
            raise ValueError("pitch curve contains non-finite values")
        if self.hop_size <= 0 or self.sample_rate <= 0:
            raise ValueError("hop_size and sample_rate must be positive")
        f0.setflags(write=False)
        object.__setattr__(self, "f0", f0)

    def __len__(self) -> int:
        return self.f0.shape[0]


@dataclass(frozen=True)
class PitchFusionConfig:
    sigma: float = 4.0
    gamma: float = 0.002
    zcr_win: int = 512
    zcr_hop: int = 256

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.zcr_win <= 0 or self.zcr_hop <= 0:
            raise ValueError("zcr_win and zcr_hop must be positive")


def analysis_window(sample_rate: int, f_floor: float) -> int:
    return int(np.ceil(2 * sample_rate / f_floor))


def _frame_nccf(wave: Waveform, hop_size: int, f_floor: float, f_ceil: float):
    """Normalized cross-correlation per frame over lags ``[0, max_lag + 1]``.

    Returns ``(nccf, min_lag, max_lag, frame_rms)``.
    """
    sr = wave.sample_rate
    if not 0 < f_floor < f_ceil < sr / 2:
        raise ValueError(f"need 0 < f_floor < f_ceil < {sr / 2}, got {f_floor}, {f_ceil}")
    win = analysis_window(sr, f_floor)
    if len(wave) < win:
        raise ValueError(
            f"waveform of {len(wave)} samples is shorter than one analysis window ({win} samples)"
        )
    min_lag = max(2, int(np.floor(sr / f_ceil)))
    max_lag = min(int(np.ceil(sr / f_floor)), win - 2)

    frames = frame_signal(wave.samples, win, hop_size, mode="constant")
    frames = frames - frames.mean(axis=1, keepdims=True)
    n_fft = 1 << int(np.ceil(np.log2(2 * win)))
    spec = np.fft.rfft(frames, n_fft, axis=1)
    acf = np.fft.irfft(spec * np.conj(spec), n_fft, axis=1)[:, : max_lag + 2]

    sq = frames**2
    csum = np.concatenate([np.zeros((frames.shape[0], 1)), np.cumsum(sq, axis=1)], axis=1)
    lags = np.arange(max_lag + 2)
    head = csum[:, win - lags]  # energy of x[0 : win - lag]
    tail = csum[:, -1:] - csum[:, lags]  # energy of x[lag : win]
    denom = np.sqrt(np.maximum(head * tail, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        nccf = np.where(denom > 1e-12, acf / denom, 0.0)

    local = frame_signal(wave.samples, hop_size, hop_size, mode="constant")
    rms = np.sqrt(np.mean(local**2, axis=1))
    return nccf, min_lag, max_lag, rms


def _pick_lags(nccf: np.ndarray, min_lag: int, max_lag: int):
    """Shortest-lag local maximum whose height is close to the best one."""
    n_frames = nccf.shape[0]
    lags = np.zeros(n_frames, dtype=np.int64)
    heights = np.zeros(n_frames)
    core = nccf[:, min_lag : max_lag + 1]
    left = nccf[:, min_lag - 1 : max_lag]
    right = nccf[:, min_lag + 1 : max_lag + 2]
    is_peak = (core >= left) & (core > right) & (core > 0)
    for t in range(n_frames):
        cand = np.flatnonzero(is_peak[t])
        if cand.size == 0:
            continue
        values = core[t, cand]
        best = values.max()
        first = cand[np.argmax(values >= OCTAVE_TOLERANCE * best)]
        lags[t] = first + min_lag
        heights[t] = core[t, first]
    return lags, heights


def _estimate(wave, hop_size, f_floor, f_ceil, threshold, interpolate):
    nccf, min_lag, max_lag, rms = _frame_nccf(wave, hop_size, f_floor, f_ceil)
    lags, heights = _pick_lags(nccf, min_lag, max_lag)
    lag = lags.astype(np.float64)
    voiced = (lags > 0) & (heights >= threshold) & (rms >= RMS_GATE)
    if interpolate:
        rows = np.arange(len(lags))
        safe = np.maximum(lags, 1)
        a, b, c = nccf[rows, safe - 1], nccf[rows, safe], nccf[rows, safe + 1]
        curvature = a - 2 * b + c
        with np.errstate(divide="ignore", invalid="ignore"):
            shift = np.where(curvature < 0, 0.5 * (a - c) / curvature, 0.0)
        lag = lag + np.clip(shift, -0.5, 0.5)
    f0 = np.zeros(len(lags))
    f0[voiced] = np.clip(wave.sample_rate / lag[voiced], f_floor, f_ceil)
    return PitchCurve(f0, hop_size, wave.sample_rate)


def estimate_base_coarse(wave: Waveform, hop_size: int = 256, f_floor: float = F_FLOOR,
                         f_ceil: float = F_CEIL) -> PitchCurve:
    """Integer-lag autocorrelation tracker with a strict voicing gate (NCCF >= 0.5)."""
    return _estimate(wave, hop_size, f_floor, f_ceil, COARSE_THRESHOLD, interpolate=False)


def estimate_base_fine(wave: Waveform, hop_size: int = 256, f_floor: float = F_FLOOR,
                       f_ceil: float = F_CEIL) -> PitchCurve:
    """Autocorrelation tracker with parabolic peak refinement and a permissive gate (NCCF >= 0.3)."""
    return _estimate(wave, hop_size, f_floor, f_ceil, FINE_THRESHOLD, interpolate=True)


def zcr_trend(wave: Waveform, cfg: PitchFusionConfig) -> FrameCurve:
    """Gaussian-smoothed forward difference of the zero-crossing rate."""
    zcr = zero_crossing_rate(wave, cfg.zcr_win, cfg.zcr_hop)
    return gaussian_smooth(discrete_derivative(zcr), cfg.sigma)


def align_frames(curve: FrameCurve, n_frames: int, hop_size: int) -> np.ndarray:
    """Nearest-frame lookup of ``curve`` on a grid of ``n_frames`` frames spaced ``hop_size`` apart."""
    idx = np.rint(np.arange(n_frames) * hop_size / curve.hop_size).astype(np.int64)
    return curve.values[np.clip(idx, 0, len(curve) - 1)]


def fuse_pitch(fine: PitchCurve, coarse: PitchCurve, wave: Waveform,
               cfg: PitchFusionConfig = PitchFusionConfig()) -> PitchCurve:
    """Combine fine and coarse estimates using the ZCR trend.

    Per frame, with ``d`` the smoothed ZCR derivative: ``d <= gamma`` keeps
    the fine value; ``d > gamma`` keeps it only where the coarse tracker is
    voiced and otherwise marks the frame unvoiced.
    """
    if fine.hop_size != coarse.hop_size or len(fine) != len(coarse):
        raise ValueError(
            f"fine/coarse grids differ: {len(fine)}@{fine.hop_size} vs {len(coarse)}@{coarse.hop_size}"
        )
    d = align_frames(zcr_trend(wave, cfg), len(fine), fine.hop_size)
    if d.shape[0] != len(fine):
        raise ValueError("ZCR trend could not be aligned to the pitch grid")
    rising = d > cfg.gamma
    f0 = np.where(rising & (coarse.f0 == 0), 0.0, fine.f0)
    return PitchCurve(f0, fine.hop_size, fine.sample_rate)


def estimate_pitch(wave: Waveform, hop_size: int = 256, cfg: PitchFusionConfig = PitchFusionConfig(),
                   f_floor: float = F_FLOOR, f_ceil: float = F_CEIL) -> PitchCurve:
    """Run both base trackers and fuse them."""
    fine = estimate_base_fine(wave, hop_size, f_floor, f_ceil)
    coarse = estimate_base_coarse(wave, hop_size, f_floor, f_ceil)
    return fuse_pitch(fine, coarse, wave, cfg)


def voiced_mask(curve: PitchCurve) -> np.ndarray:
    return curve.f0 > 0


def write_pitch_curve(path, curve: PitchCurve) -> None:
    lines = [f"# hop={curve.hop_size} sr={curve.sample_rate}"]
    lines += [f"{i} {f:.6f}" for i, f in enumerate(curve.f0)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_pitch_curve(path) -> PitchCurve:
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith("#"):
        raise ValueError(f"{path}: missing '# hop=<n> sr=<n>' header")
    fields = dict(item.split("=", 1) for item in text[0][1:].split())
    rows = [line.split() for line in text[1:] if line.strip()]
    index = np.array([int(r[0]) for r in rows], dtype=np.int64)
    if not np.array_equal(index, np.arange(len(rows))):
        raise ValueError(f"{path}: frame indices are not 0..{len(rows) - 1}")
    return PitchCurve(np.array([float(r[1]) for r in rows]), int(fields["hop"]), int(fields["sr"]))
