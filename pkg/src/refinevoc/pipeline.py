"""End-to-end glue: features, templates, training batches, the training loop and copy synthesis."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .augmentation import AugmentedSlice, ShiftRange, make_training_item, required_source_length
from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig, config_from_dict
from .pitch_track import PitchCurve, estimate_pitch
from .refiner_net import generator_forward
from .signal_core import MelSpectrogram, Waveform, kaiser_resample, mel_spectrogram
from .speech_template import SpeechTemplate, TemplateConfig, template_for
from .training import Batch, ModelState, build_state, train_step
from .wavio import read_wav

log = logging.getLogger(__name__)

METRIC_KEYS = ("step", "loss_total", "loss_mel", "loss_env", "loss_adv_g", "loss_mpd", "loss_mrd")


@dataclass(frozen=True)
class Features:
    mel: MelSpectrogram
    pitch: PitchCurve
    template: SpeechTemplate


def conform(wave: Waveform, cfg: RunConfig) -> Waveform:
    """Resample to the configured rate and trim to a whole number of hops."""
    if wave.sample_rate != cfg.sample_rate:
        wave = kaiser_resample(wave, cfg.sample_rate)
    n = len(wave) // cfg.mel.hop_size * cfg.mel.hop_size
    if n == 0:
        raise ValueError(f"audio shorter than one hop ({cfg.mel.hop_size} samples)")
    return Waveform(wave.samples[:n], wave.sample_rate)


def extract_features(wave: Waveform, cfg: RunConfig, template_seed: int | None = None) -> Features:
    """Conditioning mel, fused pitch and speech template for a hop-aligned waveform."""
    mel = mel_spectrogram(wave, cfg.mel)
    pitch = estimate_pitch(wave, cfg.mel.hop_size, cfg.pitch.fusion, cfg.pitch.f_floor, cfg.pitch.f_ceil)
    tcfg = cfg.template
    if template_seed is not None:
        tcfg = TemplateConfig(tcfg.noise_amp, template_seed, tcfg.pulse_width)
    template = template_for(pitch, mel, len(wave), tcfg)
    return Features(mel, pitch, template)


def _plain_slice(source: Waveform, n_slice: int, rng: np.random.Generator, source_id: str) -> AugmentedSlice:
    if len(source) < n_slice:
        raise ValueError(f"source {source_id} has {len(source)} samples; needs {n_slice}")
    offset = int(rng.integers(0, len(source) - n_slice + 1))
    return AugmentedSlice(Waveform(source.samples[offset:offset + n_slice], source.sample_rate),
                          0, 1.0, source_id, offset)


def feasible_shifts(shift_range: ShiftRange, n_source: int, n_slice: int) -> ShiftRange:
    """Narrow the upward shifts to those a source of ``n_source`` samples can feed."""
    top = shift_range.zeta_max
    while top > 0 and required_source_length(n_slice, top) > n_source:
        top -= 1
    return ShiftRange(shift_range.zeta_min, top)


def draw_item(sources: list[tuple[str, Waveform]], cfg: RunConfig, seed: int, step: int,
              index: int, attempts: int = 16) -> tuple[AugmentedSlice, Features]:
    """Training item ``index`` of ``step``; a pure function of ``(seed, step, index)``."""
    rng = np.random.default_rng([seed, step, index])
    n_slice = cfg.training.n_slice
    for _ in range(attempts):
        source_id, source = sources[int(rng.integers(len(sources)))]
        try:
            if cfg.training.augment:
                shifts = feasible_shifts(cfg.shift, len(source), n_slice)
                item = make_training_item(source, n_slice, shifts, cfg.loudness, rng, source_id)
            else:
                item = _plain_slice(source, n_slice, rng, source_id)
                if not np.any(item.wave.samples):
                    raise ValueError("silent slice")
        except ValueError as exc:
            if "silent" in str(exc):
                continue
            raise
        features = extract_features(item.wave, cfg, template_seed=int(rng.integers(2**31)))
        return item, features
    raise ValueError(f"no non-silent slice found after {attempts} draws at step {step}")


def make_batch(items: list[tuple[AugmentedSlice, Features]], cfg: RunConfig) -> Batch:
    hop = cfg.mel.hop_size
    n = cfg.training.n_slice
    templates = np.stack([f.template.samples for _, f in items])
    mels = np.stack([f.mel.log_mels[:, : n // hop] for _, f in items])
    targets = np.stack([item.wave.samples for item, _ in items])
    return Batch(torch.tensor(templates), torch.tensor(mels), torch.tensor(targets), cfg.sample_rate)


def load_sources(manifest_path, cfg: RunConfig) -> list[tuple[str, Waveform]]:
    manifest_path = Path(manifest_path)
    try:
        entries = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{manifest_path}: invalid manifest JSON ({exc})") from None
    if not isinstance(entries, list) or not entries:
        raise ValueError(f"{manifest_path}: manifest must be a non-empty JSON array")
    sources = []
    for entry in entries:
        path = Path(entry["path"])
        if not path.is_absolute():
            path = manifest_path.parent / path
        wave, _ = read_wav(path)
        sources.append((str(entry["path"]), conform(wave, cfg)))
    return sources


def metrics_record(metrics: dict) -> dict:
    return {key: metrics[key] for key in METRIC_KEYS}


def train(sources: list[tuple[str, Waveform]], cfg: RunConfig, out_dir, seed: int,
          state: ModelState | None = None, steps: int | None = None) -> ModelState:
    """Run the training loop until ``steps``, writing metrics JSONL and checkpoints into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dtype = getattr(torch, cfg.training.dtype)
    if state is None:
        state = build_state(cfg.generator, cfg.discriminator, cfg.training.optimizer, seed, dtype)
    steps = cfg.training.steps if steps is None else steps
    extra = {"config": cfg.to_dict(), "data_seed": seed}
    with open(out_dir / "metrics.jsonl", "a") as fh:
        while state.step < steps:
            items = [draw_item(sources, cfg, seed, state.step, i) for i in range(cfg.training.batch_size)]
            state, metrics = train_step(state, make_batch(items, cfg), cfg.weights, cfg.mel_loss, cfg.envelope)
            fh.write(json.dumps(metrics_record(metrics)) + "\n")
            fh.flush()
            if state.step % cfg.training.checkpoint_every == 0 or state.step == steps:
                save_checkpoint(out_dir / f"ckpt_{state.step:08d}.rvc", state, extra)
                save_checkpoint(out_dir / "latest.rvc", state, extra)
                log.info("step %d: %s", state.step, metrics_record(metrics))
    return state


def resume(path) -> tuple[ModelState, RunConfig, int]:
    """Load a training checkpoint written by :func:`train`. Returns ``(state, config, data_seed)``."""
    state, extra = load_checkpoint(path)
    if "config" not in extra:
        raise ValueError(f"{path}: checkpoint carries no run configuration")
    return state, config_from_dict(extra["config"]), int(extra.get("data_seed", state.seed))


def copy_synthesis(wave: Waveform, state: ModelState, cfg: RunConfig, template_seed: int = 0) -> Waveform:
    """Reconstruct ``wave`` from its own mel spectrogram and pitch."""
    wave = conform(wave, cfg)
    features = extract_features(wave, cfg, template_seed)
    state.generator.eval()
    return generator_forward(state.generator, features.template, features.mel)
