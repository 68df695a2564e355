"""``refinevoc`` command line.

Exit codes: 0 success, 1 usage or configuration error, 2 I/O error,
3 numerical failure (non-finite loss).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import secrets
import sys
from pathlib import Path

import numpy as np

from . import pipeline
from .augmentation import loudness_augment, pitch_shift
from .checkpoint import CheckpointError
from .config import ConfigError, RunConfig, load_config
from .losses import envelope_loss, multi_mel_loss
from .pitch_track import estimate_pitch, write_pitch_curve
from .signal_core import Waveform, kaiser_resample, mel_spectrogram
from .training import NonFiniteLossError
from .wavio import SUBTYPES, WavError, read_wav, write_wav

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    seed = secrets.randbits(32)
    print(f"seed: {seed}", file=sys.stderr)
    return seed


def _read(path, cfg: RunConfig | None = None) -> tuple[Waveform, str]:
    wave, subtype = read_wav(path)
    if cfg is not None and wave.sample_rate != cfg.sample_rate:
        logging.getLogger(__name__).warning("%s: resampling %d Hz to %d Hz", path, wave.sample_rate, cfg.sample_rate)
        wave = kaiser_resample(wave, cfg.sample_rate)
    return wave, subtype


def cmd_scan(args, cfg: RunConfig) -> int:
    root = Path(args.dir)
    if not root.is_dir():
        raise FileNotFoundError(f"{root}: not a directory")
    out = Path(args.output)
    entries, warnings = [], []
    for path in sorted(p for p in root.rglob("*") if p.suffix.lower() == ".wav" and p.is_file()):
        try:
            wave, _ = read_wav(path)
        except (WavError, OSError, ValueError) as exc:
            warnings.append({"path": str(path), "error": str(exc)})
            print(f"warning: {path}: {exc}", file=sys.stderr)
            continue
        entries.append({"path": str(path.resolve()), "sample_rate": wave.sample_rate, "n_samples": len(wave)})
    out.write_text(json.dumps(entries, indent=2) + "\n")
    sidecar = out.with_name(out.name + ".warnings.json")
    if warnings:
        sidecar.write_text(json.dumps(warnings, indent=2) + "\n")
    elif sidecar.exists():
        sidecar.unlink()
    print(f"{len(entries)} files, {len(warnings)} warnings -> {out}")
    return EXIT_OK


def cmd_pitch(args, cfg: RunConfig) -> int:
    wave, _ = _read(args.input)
    p = cfg.pitch
    curve = estimate_pitch(wave, args.hop or cfg.mel.hop_size, p.fusion, p.f_floor, p.f_ceil)
    write_pitch_curve(args.output, curve)
    return EXIT_OK


def cmd_template(args, cfg: RunConfig) -> int:
    seed = _seed(args)
    wave, _ = _read(args.input, cfg)
    features = pipeline.extract_features(pipeline.conform(wave, cfg), cfg, template_seed=seed)
    t = features.template
    write_wav(args.output, Waveform(np.clip(t.samples, -1.0, 1.0), t.sample_rate))
    return EXIT_OK


def cmd_augment(args, cfg: RunConfig) -> int:
    if args.zeta not in cfg.shift:
        raise UsageError(f"--zeta {args.zeta} outside [{cfg.shift.zeta_min}, {cfg.shift.zeta_max}]")
    loud = cfg.loudness
    overrides = {k: getattr(args, k) for k in ("p_min", "p_max", "r_min", "r_max") if getattr(args, k) is not None}
    if overrides:
        try:
            loud = dataclasses.replace(loud, **overrides)
        except ValueError as exc:
            raise UsageError(f"loudness: {exc}") from None
    rng = np.random.default_rng(_seed(args))
    wave, subtype = _read(args.input)
    shifted = pitch_shift(wave, args.zeta)
    out, gain = loudness_augment(shifted, loud, rng)
    write_wav(args.output, out, subtype if subtype in SUBTYPES else "FLOAT")
    print(json.dumps({"zeta": args.zeta, "gain": gain, "n_samples": len(out)}))
    return EXIT_OK


def cmd_eval_losses(args, cfg: RunConfig) -> int:
    a, _ = _read(args.a, cfg)
    b, _ = _read(args.b, cfg)
    if len(a) != len(b):
        raise UsageError(f"length mismatch: {args.a} has {len(a)} samples, {args.b} has {len(b)}")
    result = {
        "mel": float(multi_mel_loss(a, b, cfg.mel_loss)),
        "envelope": float(envelope_loss(a, b, cfg.envelope)),
    }
    text = json.dumps(result)
    if args.output:
        Path(args.output).write_text(text + "\n")
    print(text)
    return EXIT_OK


def cmd_train_toy(args, cfg: RunConfig) -> int:
    if args.resume:
        state, cfg, seed = pipeline.resume(args.resume)
        if args.steps is not None:
            cfg = dataclasses.replace(cfg, training=dataclasses.replace(cfg.training, steps=args.steps))
    else:
        state = None
        seed = _seed(args)
    sources = pipeline.load_sources(args.manifest, cfg)
    state = pipeline.train(sources, cfg, args.out_dir, seed, state)
    print(f"trained to step {state.step}; checkpoints in {args.out_dir}")
    return EXIT_OK


def cmd_copy_synth(args, cfg: RunConfig) -> int:
    seed = _seed(args)
    state, ckpt_cfg, _ = pipeline.resume(args.checkpoint)
    wave, _ = _read(args.input, ckpt_cfg)
    out = pipeline.copy_synthesis(wave, state, ckpt_cfg, template_seed=seed)
    write_wav(args.output, out)
    return EXIT_OK


def cmd_dump_spec(args, cfg: RunConfig) -> int:
    overrides = {k: getattr(args, k) for k in ("fft_size", "hop_size", "win_size", "n_mels")
                 if getattr(args, k) is not None}
    try:
        params = dataclasses.replace(cfg.mel, **overrides)
    except ValueError as exc:
        raise UsageError(f"mel: {exc}") from None
    wave, _ = _read(args.input)
    mel = mel_spectrogram(wave, params)
    with open(args.output, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame"] + [f"mel_{k}" for k in range(params.n_mels)])
        for t, column in enumerate(mel.log_mels.T):
            writer.writerow([t] + [repr(float(v)) for v in column])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="refinevoc", description="Pitch-guided GAN vocoder toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def command(name, func, help_text, seeded=False):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", help="TOML run configuration (defaults: full 44.1 kHz preset)")
        if seeded:
            p.add_argument("--seed", type=int, help="random seed; drawn from entropy and printed when omitted")
        p.set_defaults(func=func)
        return p

    p = command("scan", cmd_scan, "build a JSON manifest of the WAV files under a directory")
    p.add_argument("dir")
    p.add_argument("-o", "--output", default="manifest.json")

    p = command("pitch", cmd_pitch, "write the fused pitch curve as two-column text")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--hop", type=int, help="frame hop in samples (default: mel.hop_size)")

    p = command("template", cmd_template, "write the speech template for a recording", seeded=True)
    p.add_argument("input")
    p.add_argument("output")

    p = command("augment", cmd_augment, "pitch-shift and loudness-augment a recording", seeded=True)
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--zeta", type=int, default=0, help="shift in semitones")
    for name in ("p_min", "p_max", "r_min", "r_max"):
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=float)

    p = command("eval-losses", cmd_eval_losses, "multi-mel and envelope losses between two recordings")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("-o", "--output")

    p = command("train-toy", cmd_train_toy, "train on a manifest, writing metrics and checkpoints", seeded=True)
    p.add_argument("manifest")
    p.add_argument("out_dir")
    p.add_argument("--steps", type=int, help="stop after this many total steps")
    p.add_argument("--resume", help="continue from a checkpoint (its configuration is reused)")

    p = command("copy-synth", cmd_copy_synth, "resynthesize a recording from its own features", seeded=True)
    p.add_argument("input")
    p.add_argument("checkpoint")
    p.add_argument("output")

    p = command("dump-spec", cmd_dump_spec, "write the log-mel spectrogram as CSV (one row per frame)")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--fft", dest="fft_size", type=int)
    p.add_argument("--hop", dest="hop_size", type=int)
    p.add_argument("--win", dest="win_size", type=int)
    p.add_argument("--n-mels", dest="n_mels", type=int)
    return parser


def _apply_overrides(args, cfg: RunConfig) -> RunConfig:
    training = {}
    if getattr(args, "steps", None) is not None and not getattr(args, "resume", None):
        training["steps"] = args.steps
    if args.command == "train-toy" and getattr(args, "seed", None) is not None:
        training["seed"] = args.seed
    if training:
        try:
            cfg = dataclasses.replace(cfg, training=dataclasses.replace(cfg.training, **training))
        except ValueError as exc:
            raise ConfigError(f"training: {exc}") from None
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _apply_overrides(args, load_config(args.config))
        return args.func(args, cfg)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NonFiniteLossError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, CheckpointError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
