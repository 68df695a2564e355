"""Deterministic signal primitives.

Everything here works on numpy arrays in double precision and is free of
side effects. The differentiable counterparts used during training live in
:mod:`refinevoc.losses` and are cross-checked against these functions.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import get_window

LOG_FLOOR = 1e-5

# Kaiser-windowed sinc interpolator settings.
KAISER_BETA = 14.769656459379492
KAISER_ZERO_CROSSINGS = 64
KAISER_ROLLOFF = 0.9475937167399596
_TABLE_DENSITY = 2**10


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Waveform:
    """Mono sample sequence with its sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = _frozen(self.samples)
        if samples.ndim != 1:
            raise ValueError(f"waveform must be 1-D, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("waveform contains non-finite samples")
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be a positive integer, got {self.sample_rate}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate


@dataclass(frozen=True)
class MelParamSet:
    """STFT and mel projection parameters.

    ``f_max=None`` means the Nyquist frequency of whatever signal the set is
    applied to.
    """

    fft_size: int = 2048
    win_size: int = 2048
    hop_size: int = 256
    n_mels: int = 128
    f_min: float = 20.0
    f_max: float | None = None

    def __post_init__(self):
        if not 0 < self.win_size <= self.fft_size:
            raise ValueError(
                f"need 0 < win_size <= fft_size, got win={self.win_size} fft={self.fft_size}"
            )
        if not 0 < self.hop_size <= self.win_size:
            raise ValueError(
                f"need 0 < hop_size <= win_size, got hop={self.hop_size} win={self.win_size}"
            )
        if self.n_mels < 1:
            raise ValueError(f"n_mels must be >= 1, got {self.n_mels}")
        if not self.f_min > 0:
            raise ValueError(f"f_min must be positive, got {self.f_min}")
        if self.f_max is not None and not self.f_min < self.f_max:
            raise ValueError(f"need f_min < f_max, got {self.f_min} >= {self.f_max}")

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1

    def resolved_f_max(self, sample_rate: int) -> float:
        f_max = sample_rate / 2 if self.f_max is None else float(self.f_max)
        if f_max > sample_rate / 2:
            raise ValueError(f"f_max {f_max} exceeds Nyquist {sample_rate / 2}")
        if not self.f_min < f_max:
            raise ValueError(f"need f_min < f_max, got {self.f_min} >= {f_max}")
        return f_max

    def n_frames(self, n_samples: int) -> int:
        return n_samples // self.hop_size + 1


@dataclass(frozen=True)
class Spectrogram:
    magnitudes: np.ndarray  # [n_bins, n_frames]
    params: MelParamSet


@dataclass(frozen=True)
class MelSpectrogram:
    log_mels: np.ndarray  # [n_mels, n_frames]
    params: MelParamSet
    sample_rate: int

    @property
    def n_frames(self) -> int:
        return self.log_mels.shape[1]


@dataclass(frozen=True)
class FrameCurve:
    """A per-frame feature curve (ZCR, envelope, smoothed derivative...)."""

    values: np.ndarray
    hop_size: int = 1
    win_size: int = 1

    def __post_init__(self):
        values = _frozen(self.values)
        if values.ndim != 1:
            raise ValueError("frame curve must be 1-D")
        if not np.all(np.isfinite(values)):
            raise ValueError("frame curve contains non-finite values")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.shape[0]


def hann_window(win_size: int) -> np.ndarray:
    """Periodic Hann window (the DFT-even variant used by torch.hann_window)."""
    return get_window("hann", win_size, fftbins=True)


def padded_window(params: MelParamSet) -> np.ndarray:
    window = np.zeros(params.fft_size)
    left = (params.fft_size - params.win_size) // 2
    window[left:left + params.win_size] = hann_window(params.win_size)
    return window


def frame_signal(samples: np.ndarray, frame_size: int, hop_size: int, mode: str = "reflect") -> np.ndarray:
    """Center-padded frames; frame ``t`` is centred on sample ``t * hop_size``.

    Returns an array of shape ``[n_frames, frame_size]`` with
    ``n_frames = len(samples) // hop_size + 1``.
    """
    samples = np.asarray(samples, dtype=np.float64)
    pad = (frame_size // 2, frame_size - frame_size // 2)
    if mode == "reflect" and samples.shape[0] > 1:
        padded = np.pad(samples, pad, mode="reflect")
    else:
        padded = np.pad(samples, pad, mode="constant" if mode != "edge" else "edge")
    n_frames = samples.shape[0] // hop_size + 1
    windows = sliding_window_view(padded, frame_size)[::hop_size]
    return windows[:n_frames]


def stft_magnitude(wave: Waveform, params: MelParamSet) -> Spectrogram:
    """Hann-windowed, reflect-padded STFT magnitude, shape ``[n_bins, n_frames]``."""
    if len(wave) < 1:
        raise ValueError("cannot take the STFT of an empty waveform")
    frames = frame_signal(wave.samples, params.fft_size, params.hop_size)
    spec = np.fft.rfft(frames * padded_window(params), axis=-1)
    return Spectrogram(np.abs(spec).T, params)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@lru_cache(maxsize=64)
def _mel_filterbank_cached(params: MelParamSet, sample_rate: int) -> np.ndarray:
    f_max = params.resolved_f_max(sample_rate)
    edges = mel_to_hz(np.linspace(hz_to_mel(params.f_min), hz_to_mel(f_max), params.n_mels + 2))
    bin_freqs = np.arange(params.n_bins) * sample_rate / params.fft_size
    lower, center, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (bin_freqs - lower) / (center - lower)
    falling = (upper - bin_freqs) / (upper - center)
    fb = np.maximum(0.0, np.minimum(rising, falling))
    empty = np.flatnonzero(fb.max(axis=1) <= 0)
    if empty.size:
        raise ValueError(
            f"{params.n_mels} mel bands are too many for fft_size={params.fft_size} "
            f"at {sample_rate} Hz: band(s) {empty.tolist()} cover no FFT bin"
        )
    fb.setflags(write=False)
    return fb


def mel_filterbank(params: MelParamSet, sample_rate: int) -> np.ndarray:
    """Triangular HTK-scale filterbank of shape ``[n_mels, n_bins]`` with unit peaks."""
    return _mel_filterbank_cached(params, int(sample_rate))


def mel_spectrogram(wave: Waveform, params: MelParamSet) -> MelSpectrogram:
    spec = stft_magnitude(wave, params)
    mel = mel_filterbank(params, wave.sample_rate) @ spec.magnitudes
    return MelSpectrogram(np.log(np.maximum(mel, LOG_FLOOR)), params, wave.sample_rate)


def _carry_signs(samples: np.ndarray) -> np.ndarray:
    """Sign of each sample with zeros inheriting the previous nonzero sign."""
    signs = np.sign(samples)
    idx = np.where(signs != 0, np.arange(signs.size), 0)
    np.maximum.accumulate(idx, out=idx)
    carried = signs[idx]
    carried[carried == 0] = 1.0  # leading zeros count as positive
    return carried


def zero_crossing_rate(wave: Waveform, win_size: int = 512, hop_size: int = 256) -> FrameCurve:
    """Fraction of adjacent-sample sign changes per centred window."""
    if win_size <= 0 or hop_size <= 0:
        raise ValueError("win_size and hop_size must be positive")
    if len(wave) == 0:
        raise ValueError("zero crossing rate of an empty waveform")
    signs = _carry_signs(wave.samples)
    frames = frame_signal(signs, win_size, hop_size)
    changes = np.count_nonzero(frames[:, 1:] != frames[:, :-1], axis=1)
    return FrameCurve(changes / win_size, hop_size, win_size)


def gaussian_kernel(sigma: float, rel_cutoff: float = 1e-6) -> np.ndarray:
    """``sqrt(sigma/pi) * exp(-sigma x^2)`` at integer offsets, truncated below ``rel_cutoff`` of the peak."""
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    radius = int(np.floor(np.sqrt(-np.log(rel_cutoff) / sigma)))
    x = np.arange(-radius, radius + 1)
    return np.sqrt(sigma / np.pi) * np.exp(-sigma * x.astype(np.float64) ** 2)


def gaussian_smooth(curve: FrameCurve, sigma: float) -> FrameCurve:
    kernel = gaussian_kernel(sigma)
    radius = kernel.size // 2
    padded = np.pad(curve.values, radius, mode="edge")
    smoothed = np.convolve(padded, kernel, mode="valid")
    return FrameCurve(smoothed, curve.hop_size, curve.win_size)


def discrete_derivative(curve: FrameCurve) -> FrameCurve:
    """Forward difference; the last frame repeats the previous value."""
    if len(curve) < 2:
        raise ValueError("derivative needs at least two frames")
    diff = np.diff(curve.values)
    return FrameCurve(np.append(diff, diff[-1]), curve.hop_size, curve.win_size)


def envelope_frames(samples: np.ndarray, win_size: int, hop_size: int) -> np.ndarray:
    """Max over ``[t*hop, t*hop + win)`` for every ``t*hop < len``; tail windows are shorter."""
    samples = np.asarray(samples, dtype=np.float64)
    n = samples.shape[0]
    n_frames = -(-n // hop_size)
    total = (n_frames - 1) * hop_size + win_size
    padded = np.concatenate([samples, np.full(max(total - n, 0), -np.inf)])
    return sliding_window_view(padded, win_size)[::hop_size][:n_frames].max(axis=1)


def envelope(wave: Waveform, win_size: int = 512, hop_size: int = 256) -> FrameCurve:
    """Max-pooled upper envelope. Apply to a polarity-reversed wave for the lower one."""
    if win_size <= 0 or hop_size <= 0:
        raise ValueError("win_size and hop_size must be positive")
    if len(wave) == 0:
        raise ValueError("envelope of an empty waveform")
    return FrameCurve(envelope_frames(wave.samples, win_size, hop_size), hop_size, win_size)


@lru_cache(maxsize=8)
def _sinc_table(zero_crossings: int, beta: float, rolloff: float, density: int) -> np.ndarray:
    x = np.arange(zero_crossings * density + 2) / density
    table = rolloff * np.sinc(rolloff * x) * np.kaiser(2 * x.size - 1, beta)[x.size - 1:]
    table[-1] = 0.0
    table.setflags(write=False)
    return table


def resample_ratio(samples: np.ndarray, ratio: float, n_out: int | None = None, chunk: int = 8192) -> np.ndarray:
    """Band-limited resampling of ``samples`` by an arbitrary positive ``ratio``.

    Output sample ``m`` is the band-limited interpolation of the input at
    position ``m / ratio``. When downsampling, the interpolation kernel is
    stretched so its cutoff sits below the new Nyquist frequency.
    """
    if not ratio > 0:
        raise ValueError(f"resampling ratio must be positive, got {ratio}")
    samples = np.asarray(samples, dtype=np.float64)
    n_in = samples.shape[0]
    if n_out is None:
        n_out = int(round(n_in * ratio))
    if ratio == 1.0 and n_out == n_in:
        return samples.copy()

    table = _sinc_table(KAISER_ZERO_CROSSINGS, KAISER_BETA, KAISER_ROLLOFF, _TABLE_DENSITY)
    scale = min(1.0, ratio)
    half_width = KAISER_ZERO_CROSSINGS / scale  # in input samples
    n_taps = int(np.ceil(half_width))
    offsets = np.arange(-n_taps, n_taps + 1)
    out = np.empty(n_out)
    limit = KAISER_ZERO_CROSSINGS * _TABLE_DENSITY
    for start in range(0, n_out, chunk):
        m = np.arange(start, min(start + chunk, n_out))
        t = m / ratio
        base = np.floor(t).astype(np.int64)
        idx = base[:, None] + offsets[None, :]
        dist = np.abs(t[:, None] - idx) * scale * _TABLE_DENSITY
        lo = np.minimum(dist.astype(np.int64), limit)
        frac = dist - lo
        weights = table[lo] + frac * (table[lo + 1] - table[lo])
        weights[dist >= limit] = 0.0
        valid = (idx >= 0) & (idx < n_in)
        gathered = np.where(valid, samples[np.clip(idx, 0, max(n_in - 1, 0))], 0.0)
        out[m] = scale * np.sum(weights * gathered, axis=1)
    return out


def kaiser_resample(wave: Waveform, target_rate: int) -> Waveform:
    """Resample to ``target_rate`` Hz; output length is ``round(n * target / source)``."""
    if not target_rate > 0:
        raise ValueError(f"target_rate must be positive, got {target_rate}")
    ratio = target_rate / wave.sample_rate
    return Waveform(resample_ratio(wave.samples, ratio), int(target_rate))


def peak(wave: Waveform) -> float:
    if len(wave) == 0:
        raise ValueError("peak of an empty waveform")
    return float(np.max(np.abs(wave.samples)))


def apply_gain(wave: Waveform, gain: float) -> Waveform:
    if not np.isfinite(gain):
        raise ValueError(f"gain must be finite, got {gain}")
    return Waveform(wave.samples * gain, wave.sample_rate)
