"""Run configuration: nested TOML sections validated into module config objects."""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .augmentation import LoudnessRange, ShiftRange
from .losses import DEFAULT_LOSS_SETS, EnvelopeConfig, LossWeights, MelLossConfig
from .pitch_track import F_CEIL, F_FLOOR, PitchFusionConfig
from .refiner_net import DiscriminatorConfig, GeneratorConfig
from .signal_core import MelParamSet
from .speech_template import TemplateConfig
from .training import OptimizerConfig


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field path."""


@dataclass(frozen=True)
class PitchConfig:
    sigma: float = 4.0
    gamma: float = 0.002
    zcr_win: int = 512
    zcr_hop: int = 256
    f_floor: float = F_FLOOR
    f_ceil: float = F_CEIL

    def __post_init__(self):
        if not 0 < self.f_floor < self.f_ceil:
            raise ValueError(f"need 0 < f_floor < f_ceil, got {self.f_floor}, {self.f_ceil}")

    @property
    def fusion(self) -> PitchFusionConfig:
        return PitchFusionConfig(self.sigma, self.gamma, self.zcr_win, self.zcr_hop)


@dataclass(frozen=True)
class TrainingConfig:
    batch_size: int = 16
    steps: int = 1000
    seed: int = 0
    lr: float = 2e-4
    betas: tuple[float, float] = (0.8, 0.99)
    n_slice: int = 131072
    augment: bool = True
    checkpoint_every: int = 1000
    dtype: str = "float32"

    def __post_init__(self):
        object.__setattr__(self, "betas", tuple(self.betas))
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.n_slice < 1:
            raise ValueError("n_slice must be >= 1")
        if self.checkpoint_every < 1:
            raise ValueError("checkpoint_every must be >= 1")
        if self.dtype not in ("float32", "float64"):
            raise ValueError(f"dtype must be float32 or float64, got {self.dtype!r}")
        OptimizerConfig(self.lr, self.betas)

    @property
    def optimizer(self) -> OptimizerConfig:
        return OptimizerConfig(self.lr, self.betas)


@dataclass(frozen=True)
class RunConfig:
    sample_rate: int = 44100
    mel: MelParamSet = field(default_factory=MelParamSet)
    pitch: PitchConfig = field(default_factory=PitchConfig)
    template: TemplateConfig = field(default_factory=TemplateConfig)
    shift: ShiftRange = field(default_factory=ShiftRange)
    loudness: LoudnessRange = field(default_factory=LoudnessRange)
    mel_loss: MelLossConfig = field(default_factory=MelLossConfig)
    envelope: EnvelopeConfig = field(default_factory=EnvelopeConfig)
    weights: LossWeights = field(default_factory=LossWeights)
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    discriminator: DiscriminatorConfig = field(default_factory=DiscriminatorConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)

    def __post_init__(self):
        check_consistency(self)

    def to_dict(self) -> dict:
        """Plain-data form accepted back by :func:`config_from_dict`."""
        data = _plain(dataclasses.asdict(self))
        data["mel_loss"]["sets"] = data["mel_loss"].pop("param_sets")
        return data


_SECTIONS = {
    "mel": MelParamSet,
    "pitch": PitchConfig,
    "template": TemplateConfig,
    "shift": ShiftRange,
    "loudness": LoudnessRange,
    "envelope": EnvelopeConfig,
    "weights": LossWeights,
    "generator": GeneratorConfig,
    "discriminator": DiscriminatorConfig,
    "training": TrainingConfig,
}


def _plain(value):
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def check_consistency(cfg: RunConfig) -> None:
    if cfg.sample_rate <= 0:
        raise ConfigError(f"sample_rate: must be positive, got {cfg.sample_rate}")
    if cfg.generator.hop_size != cfg.mel.hop_size:
        raise ConfigError(
            f"generator.hop_size: {cfg.generator.hop_size} must equal mel.hop_size={cfg.mel.hop_size}")
    if cfg.generator.n_mels != cfg.mel.n_mels:
        raise ConfigError(f"generator.n_mels: {cfg.generator.n_mels} must equal mel.n_mels={cfg.mel.n_mels}")
    if cfg.training.n_slice % cfg.mel.hop_size:
        raise ConfigError(f"training.n_slice: {cfg.training.n_slice} must be a multiple of mel.hop_size")
    if cfg.pitch.f_ceil >= cfg.sample_rate / 2:
        raise ConfigError(f"pitch.f_ceil: must be below Nyquist ({cfg.sample_rate / 2} Hz)")
    for name, params in [("mel", cfg.mel)] + [(f"mel_loss.sets[{i}]", p) for i, p in enumerate(cfg.mel_loss.param_sets)]:
        try:
            params.resolved_f_max(cfg.sample_rate)
        except ValueError as exc:
            raise ConfigError(f"{name}: {exc}") from None


def _expected_type(default):
    if isinstance(default, bool):
        return (bool,)
    if isinstance(default, int):
        return (int,)
    if isinstance(default, float):
        return (int, float)
    if isinstance(default, str):
        return (str,)
    if isinstance(default, (tuple, list)):
        return (list, tuple)
    return None


def _build(cls, data, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a table, got {type(data).__name__}")
    known = {f.name: f for f in dataclasses.fields(cls)}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"{path}.{key}: unknown key")
        f = known[key]
        default = f.default if f.default is not dataclasses.MISSING else None
        expected = _expected_type(default)
        if expected and (not isinstance(value, expected) or (isinstance(value, bool) and bool not in expected)):
            raise ConfigError(f"{path}.{key}: expected {expected[-1].__name__}, got {type(value).__name__} {value!r}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def config_from_dict(data: dict, base: RunConfig | None = None) -> RunConfig:
    """Overlay ``data`` on ``base`` (defaults when omitted); unknown keys are errors."""
    base = base or RunConfig()
    merged = dataclasses.asdict(base)
    for key in data:
        if key not in merged:
            raise ConfigError(f"{key}: unknown section")
    values = {}
    for key, value in data.items():
        if key == "sample_rate":
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigError(f"sample_rate: expected int, got {value!r}")
            values[key] = value
        elif key == "mel_loss":
            values[key] = _build_mel_loss(value, merged["mel_loss"])
        else:
            section = {**merged[key], **value} if isinstance(value, dict) else value
            values[key] = _build(_SECTIONS[key], section, key)
    for key in merged:
        if key not in values:
            values[key] = getattr(base, key)
    try:
        return RunConfig(**values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def _build_mel_loss(value, base: dict) -> MelLossConfig:
    if not isinstance(value, dict):
        raise ConfigError("mel_loss: expected a table")
    for key in value:
        if key not in ("sets", "log_floor"):
            raise ConfigError(f"mel_loss.{key}: unknown key")
    sets = value.get("sets")
    if sets is None:
        param_sets = tuple(MelParamSet(**s) for s in base["param_sets"])
    else:
        if not isinstance(sets, list) or not sets:
            raise ConfigError("mel_loss.sets: expected a non-empty array of tables")
        param_sets = tuple(_build(MelParamSet, s, f"mel_loss.sets[{i}]") for i, s in enumerate(sets))
    try:
        return MelLossConfig(param_sets, value.get("log_floor", base["log_floor"]))
    except ValueError as exc:
        raise ConfigError(f"mel_loss: {exc}") from None


def load_config(path=None, base: RunConfig | None = None) -> RunConfig:
    if path is None:
        return base or RunConfig()
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FileNotFoundError(f"{path}: cannot read config ({exc.strerror})") from exc
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML ({exc})") from None
    preset = data.pop("preset", None)
    if preset is not None:
        base = preset_config(preset)
    return config_from_dict(data, base)


def preset_config(name: str) -> RunConfig:
    if name not in ("full", "toy"):
        raise ConfigError(f"preset: unknown preset {name!r} (choose 'full' or 'toy')")
    text = resources.files("refinevoc").joinpath(f"data/{name}.toml").read_text()
    data = tomllib.loads(text)
    data.pop("preset", None)
    return config_from_dict(data, RunConfig())


def toy_config() -> RunConfig:
    """Desk-scale preset: 8 kHz audio, 4x hop, 8 mel bins, 4-channel generator."""
    return preset_config("toy")


def reference_config_path() -> Path:
    return Path(str(resources.files("refinevoc").joinpath("data/full.toml")))


__all__ = [
    "ConfigError", "PitchConfig", "RunConfig", "TrainingConfig", "config_from_dict",
    "load_config", "preset_config", "toy_config", "reference_config_path", "DEFAULT_LOSS_SETS",
]
