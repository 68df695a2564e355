"""Pitch-guided GAN vocoder toolkit: signal primitives, pitch fusion, speech
templates, augmentation, losses and the refine generator with its discriminators."""

from .augmentation import LoudnessRange, ShiftRange, loudness_augment, make_training_item, pitch_shift
from .config import RunConfig, load_config, preset_config, toy_config
from .losses import (
    EnvelopeConfig,
    LossWeights,
    MelLossConfig,
    adversarial_g_loss,
    discriminator_loss,
    envelope_loss,
    generator_total_loss,
    multi_mel_loss,
)
from .pitch_track import PitchCurve, PitchFusionConfig, estimate_pitch, fuse_pitch, voiced_mask
from .refiner_net import DiscriminatorConfig, GeneratorConfig, build_discriminators, build_generator
from .signal_core import (
    FrameCurve,
    MelParamSet,
    MelSpectrogram,
    Waveform,
    kaiser_resample,
    mel_spectrogram,
    stft_magnitude,
)
from .speech_template import SpeechTemplate, TemplateConfig, build_template, frame_intensity
from .training import ModelState, build_state, train_step
from .wavio import read_wav, write_wav

__version__ = "0.1.0"

__all__ = [
    "DiscriminatorConfig", "EnvelopeConfig", "FrameCurve", "GeneratorConfig", "LossWeights",
    "LoudnessRange", "MelLossConfig", "MelParamSet", "MelSpectrogram", "ModelState", "PitchCurve",
    "PitchFusionConfig", "RunConfig", "ShiftRange", "SpeechTemplate", "TemplateConfig", "Waveform",
    "adversarial_g_loss", "build_discriminators", "build_generator", "build_state", "build_template",
    "discriminator_loss", "envelope_loss", "estimate_pitch", "frame_intensity", "fuse_pitch",
    "generator_total_loss", "kaiser_resample", "load_config", "loudness_augment", "make_training_item",
    "mel_spectrogram", "multi_mel_loss", "pitch_shift", "preset_config", "read_wav", "stft_magnitude",
    "toy_config", "train_step", "voiced_mask", "write_wav",
]
