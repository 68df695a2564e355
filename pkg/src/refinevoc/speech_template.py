"""Pitch-guided speech template: the excitation signal the generator refines.

Voiced samples are silent except for impulses spaced one pitch period
apart, scaled by the frame's mel intensity. Unvoiced samples carry uniform
noise scaled by the same intensity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pitch_track import PitchCurve
from .signal_core import LOG_FLOOR, FrameCurve, MelSpectrogram

# absorbs round-off in the running phase so integer periods land exactly
_PHASE_EPS = 1e-9


@dataclass(frozen=True)
class TemplateConfig:
    noise_amp: float = 0.1
    rng_seed: int = 0
    pulse_width: int = 1

    def __post_init__(self):
        if not self.noise_amp > 0:
            raise ValueError(f"noise_amp must be positive, got {self.noise_amp}")
        if self.pulse_width < 1:
            raise ValueError(f"pulse_width must be >= 1, got {self.pulse_width}")


@dataclass(frozen=True)
class SpeechTemplate:
    samples: np.ndarray
    sample_rate: int
    pulse_positions: np.ndarray

    def __len__(self) -> int:
        return self.samples.shape[0]


def frame_intensity(mel: MelSpectrogram) -> FrameCurve:
    """Euclidean norm of each linear mel column, normalized to the loudest frame.

    Bins sitting at the log floor count as zero, so a silent utterance maps to
    all zeros.
    """
    log_mels = np.asarray(mel.log_mels, dtype=np.float64)
    if log_mels.size == 0:
        raise ValueError("empty mel spectrogram")
    linear = np.where(log_mels > np.log(LOG_FLOOR) + 1e-9, np.exp(log_mels), 0.0)
    norms = np.sqrt(np.sum(linear**2, axis=0))
    top = norms.max()
    values = norms / top if top > 0 else np.zeros_like(norms)
    return FrameCurve(values, mel.params.hop_size, mel.params.win_size)


def sample_frames(n_samples: int, hop_size: int, n_frames: int) -> np.ndarray:
    """Index of the nearest centred frame for every sample."""
    idx = (np.arange(n_samples) + hop_size // 2) // hop_size
    return np.minimum(idx, n_frames - 1)


def build_template(pitch: PitchCurve, intensity: FrameCurve, n_samples: int,
                   sample_rate: int, cfg: TemplateConfig = TemplateConfig()) -> SpeechTemplate:
    """Render the template sample by sample with a phase accumulator.

    Within a voiced run the phase grows by ``f0 / sample_rate`` per sample and
    a pulse fires each time it crosses an integer. The first sample of every
    voiced run fires immediately.
    """
    if n_samples <= 0:
        raise ValueError("n_samples must be positive")
    if len(pitch) != len(intensity):
        raise ValueError(f"pitch has {len(pitch)} frames but intensity has {len(intensity)}")
    if np.any(pitch.f0 < 0):
        raise ValueError("negative f0 in pitch curve")
    if pitch.sample_rate != sample_rate:
        raise ValueError(f"pitch curve is at {pitch.sample_rate} Hz, template requested at {sample_rate} Hz")

    frames = sample_frames(n_samples, pitch.hop_size, len(pitch))
    f0 = pitch.f0[frames]
    gain = intensity.values[frames]
    voiced = f0 > 0

    rng = np.random.default_rng(cfg.rng_seed)
    noise = rng.uniform(-1.0, 1.0, n_samples) * cfg.noise_amp * gain
    out = np.where(voiced, 0.0, noise)

    # cumulative phase inside each voiced run, excluding the run's first sample
    step = np.where(voiced, f0 / sample_rate, 0.0)
    starts = voiced & ~np.concatenate([[False], voiced[:-1]])
    step[starts] = 0.0
    phase = np.cumsum(step)
    run_id = np.cumsum(starts)
    run_base = np.concatenate([[0.0], phase[starts]])[run_id]
    count = np.floor(phase - run_base + _PHASE_EPS) + 1  # pulses fired so far within the run
    previous = np.concatenate([[0.0], count[:-1]])
    previous[starts] = 0.0
    positions = np.flatnonzero(voiced & (count > previous))

    for offset in range(cfg.pulse_width):
        at = positions + offset
        at = at[(at < n_samples)]
        at = at[voiced[at]]
        out[at] = gain[at - offset]
    return SpeechTemplate(out, sample_rate, positions)


def template_for(pitch: PitchCurve, mel: MelSpectrogram, n_samples: int,
                 cfg: TemplateConfig = TemplateConfig()) -> SpeechTemplate:
    """Template from a pitch curve and the mel spectrogram sharing its frame grid."""
    return build_template(pitch, frame_intensity(mel), n_samples, pitch.sample_rate, cfg)
