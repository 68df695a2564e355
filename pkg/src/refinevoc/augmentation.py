"""On-the-fly training data: random slices, semitone pitch shifts, peak-targeted gain."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .signal_core import Waveform, apply_gain, peak, resample_ratio

RESAMPLER_MARGIN = 64


@dataclass(frozen=True)
class ShiftRange:
    zeta_min: int = -12
    zeta_max: int = 12

    def __post_init__(self):
        if int(self.zeta_min) != self.zeta_min or int(self.zeta_max) != self.zeta_max:
            raise ValueError("shift bounds must be integers (semitones)")
        if not self.zeta_min <= 0 <= self.zeta_max:
            raise ValueError(f"need zeta_min <= 0 <= zeta_max, got [{self.zeta_min}, {self.zeta_max}]")

    def __contains__(self, zeta) -> bool:
        return int(zeta) == zeta and self.zeta_min <= zeta <= self.zeta_max


@dataclass(frozen=True)
class LoudnessRange:
    p_min: float = 0.1
    p_max: float = 1.0
    r_min: float = 0.5
    r_max: float = 2.0

    def __post_init__(self):
        if not 0 < self.p_min <= self.p_max <= 1:
            raise ValueError(f"need 0 < p_min <= p_max <= 1, got {self.p_min}, {self.p_max}")
        if not 0 < self.r_min <= self.r_max:
            raise ValueError(f"need 0 < r_min <= r_max, got {self.r_min}, {self.r_max}")

    def bounds(self, p: float) -> tuple[float, float]:
        """Target-peak interval for a clip of peak ``p``.

        When the rate limits and the peak limits do not overlap, both bounds
        collapse onto ``min(p_max, r_max * p)``.
        """
        lo = max(self.p_min, self.r_min * p)
        hi = min(self.p_max, self.r_max * p)
        if lo > hi:
            lo = hi
        return lo, hi


@dataclass(frozen=True)
class AugmentedSlice:
    wave: Waveform
    zeta: int
    gain: float
    source_id: str
    source_offset: int


def sample_shift(rng: np.random.Generator, shift_range: ShiftRange = ShiftRange()) -> int:
    """Semitone shift drawn uniformly from the integers in the range."""
    return int(rng.integers(shift_range.zeta_min, shift_range.zeta_max + 1))


def pitch_shift(wave: Waveform, zeta: int) -> Waveform:
    """Raise pitch by ``zeta`` semitones by resampling and keeping the old rate label.

    Duration scales by ``2**(-zeta/12)`` along with the pitch.
    """
    ratio = 2.0 ** (-zeta / 12)
    return Waveform(resample_ratio(wave.samples, ratio), wave.sample_rate)


def required_source_length(n_slice: int, zeta: int) -> int:
    if n_slice <= 0:
        raise ValueError("n_slice must be positive")
    return math.ceil(n_slice * 2.0 ** (zeta / 12)) + RESAMPLER_MARGIN


def loudness_augment(wave: Waveform, loud_range: LoudnessRange,
                     rng: np.random.Generator) -> tuple[Waveform, float]:
    """Rescale to a target peak drawn uniformly (linear scale) from the allowed interval."""
    p = peak(wave)
    if p == 0:
        raise ValueError("cannot loudness-augment a silent waveform")
    lo, hi = loud_range.bounds(p)
    target = rng.uniform(lo, hi)
    gain = target / p
    return apply_gain(wave, gain), gain


def make_training_item(source: Waveform, n_slice: int, shift_range: ShiftRange,
                       loud_range: LoudnessRange, rng: np.random.Generator,
                       source_id: str = "") -> AugmentedSlice:
    """Slice, pitch-shift and loudness-augment one fixed-length training example."""
    zeta = sample_shift(rng, shift_range)
    span = required_source_length(n_slice, zeta)
    if len(source) < span:
        raise ValueError(
            f"source {source_id or '<unnamed>'} has {len(source)} samples; "
            f"a {n_slice}-sample slice at zeta={zeta} needs {span}"
        )
    offset = int(rng.integers(0, len(source) - span + 1))
    extract = Waveform(source.samples[offset:offset + span], source.sample_rate)
    shifted = pitch_shift(extract, zeta)
    sliced = Waveform(shifted.samples[:n_slice], source.sample_rate)
    wave, gain = loudness_augment(sliced, loud_range, rng)
    return AugmentedSlice(wave, zeta, gain, source_id, offset)
