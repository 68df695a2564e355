"""Adversarial training step, gradient checking and model state."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Hashable, Sequence

import numpy as np
import torch

from .losses import (
    EnvelopeConfig,
    LossWeights,
    MelLossConfig,
    discriminator_loss,
    generator_total_loss,
)
from .refiner_net import (
    DiscriminatorConfig,
    Discriminators,
    Generator,
    GeneratorConfig,
    build_discriminators,
    build_generator,
)


class NonFiniteLossError(FloatingPointError):
    pass


@dataclass
class OptimizerConfig:
    lr: float = 2e-4
    betas: tuple[float, float] = (0.8, 0.99)

    def __post_init__(self):
        self.betas = tuple(float(b) for b in self.betas)
        if not self.lr > 0:
            raise ValueError(f"learning rate must be positive, got {self.lr}")
        if len(self.betas) != 2 or not all(0 <= b < 1 for b in self.betas):
            raise ValueError(f"Adam betas must be two values in [0, 1), got {self.betas}")


@dataclass
class ModelState:
    """Everything a training run owns. Mutated in place by :func:`train_step`."""

    generator: Generator
    discriminators: Discriminators
    opt_g: torch.optim.Adam
    opt_d: torch.optim.Adam
    gen_cfg: GeneratorConfig
    disc_cfg: DiscriminatorConfig
    optim_cfg: OptimizerConfig = field(default_factory=OptimizerConfig)
    step: int = 0
    seed: int = 0


def build_state(gen_cfg: GeneratorConfig, disc_cfg: DiscriminatorConfig,
                optim_cfg: OptimizerConfig = OptimizerConfig(), seed: int = 0,
                dtype: torch.dtype = torch.float32) -> ModelState:
    gen = build_generator(gen_cfg, seed).to(dtype)
    disc = build_discriminators(disc_cfg, seed + 1).to(dtype)
    opt_g = torch.optim.Adam(gen.parameters(), lr=optim_cfg.lr, betas=optim_cfg.betas)
    opt_d = torch.optim.Adam(disc.parameters(), lr=optim_cfg.lr, betas=optim_cfg.betas)
    return ModelState(gen, disc, opt_g, opt_d, gen_cfg, disc_cfg, optim_cfg, 0, seed)


@dataclass
class Batch:
    """``template [B, T]``, ``mel [B, n_mels, T / hop]``, ``target [B, T]``."""

    template: torch.Tensor
    mel: torch.Tensor
    target: torch.Tensor
    sample_rate: int

    def __post_init__(self):
        b, t = self.target.shape
        if self.template.shape != (b, t):
            raise ValueError(f"template shape {tuple(self.template.shape)} != target {(b, t)}")
        if self.mel.dim() != 3 or self.mel.shape[0] != b:
            raise ValueError(f"mel must be [batch, n_mels, frames], got {tuple(self.mel.shape)}")


def _check_finite(value: torch.Tensor, name: str, step: int, metrics: dict) -> None:
    if not torch.isfinite(value):
        detail = ", ".join(f"{k}={v:.4g}" for k, v in metrics.items())
        raise NonFiniteLossError(f"non-finite {name} at step {step}: {detail}")


def train_step(state: ModelState, batch: Batch, weights: LossWeights = LossWeights(),
               mel_cfg: MelLossConfig = MelLossConfig(),
               env_cfg: EnvelopeConfig = EnvelopeConfig()) -> tuple[ModelState, dict]:
    """One discriminator update followed by one generator update."""
    gen, disc = state.generator, state.discriminators
    dtype = next(gen.parameters()).dtype
    template = batch.template.to(dtype).unsqueeze(1)
    mel = batch.mel.to(dtype)
    target = batch.target.to(dtype)

    gen.train()
    disc.train()
    y_hat = gen(template, mel).squeeze(1)

    real_mpd, real_mrd = disc(target)
    fake_mpd, fake_mrd = disc(y_hat.detach())
    loss_d, d_metrics = discriminator_loss(real_mpd, fake_mpd, real_mrd, fake_mrd)
    _check_finite(loss_d, "discriminator loss", state.step, d_metrics)
    state.opt_d.zero_grad(set_to_none=True)
    loss_d.backward()
    state.opt_d.step()

    fake_mpd, fake_mrd = disc(y_hat)
    loss_g, g_metrics = generator_total_loss(
        target, y_hat, (fake_mpd, fake_mrd), weights, mel_cfg, env_cfg, sample_rate=batch.sample_rate)
    _check_finite(loss_g, "generator loss", state.step, g_metrics)
    state.opt_g.zero_grad(set_to_none=True)
    loss_g.backward()
    state.opt_g.step()

    state.step += 1
    metrics = {"step": state.step, **g_metrics, **d_metrics}
    return state, metrics


def finite_difference_check(fn: Callable[[], torch.Tensor], params: Sequence[torch.Tensor],
                            eps: float = 1e-3, n_samples: int = 100, seed: int = 0,
                            floor: float = 1e-8, elementwise: bool = True,
                            pattern: Callable[[], Hashable] | None = None) -> float:
    """Relative error between autograd and central-difference gradients.

    Random scalar entries (drawn across all of ``params``) are perturbed by
    ``+-eps`` until ``n_samples`` have been compared. The error is the largest
    ``|a_i - n_i| / max(|a_i|, |n_i|, floor)``; with ``elementwise=False`` it
    is norm-wise instead, ``||a - n|| / max(||a||, ||n||, floor)``, which is
    less sensitive to near-zero entries whose O(eps^2) truncation error
    rivals the gradient itself.

    ``pattern``, when given, is called after every evaluation of ``fn`` and
    returns a fingerprint of the non-smooth choices made (for example an
    :class:`~refinevoc.refiner_net.ActivationRecorder`'s ``take``). Entries
    whose perturbations change the fingerprint straddle a kink and are
    skipped.
    """
    params = list(params)
    value = fn()
    base = pattern() if pattern else None
    analytic = torch.autograd.grad(value, params, allow_unused=True)
    analytic = [torch.zeros_like(p) if g is None else g for p, g in zip(params, analytic)]

    sizes = np.array([p.numel() for p in params])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    order = np.random.default_rng(seed).permutation(int(sizes.sum()))

    a_vals, n_vals = [], []
    for flat in order:
        if len(a_vals) == n_samples:
            break
        which = int(np.searchsorted(offsets, flat, side="right") - 1)
        idx = int(flat - offsets[which])
        view = params[which].data.view(-1)
        orig = view[idx].item()
        with torch.no_grad():
            view[idx] = orig + eps
            up = float(fn())
            up_pattern = pattern() if pattern else None
            view[idx] = orig - eps
            down = float(fn())
            down_pattern = pattern() if pattern else None
            view[idx] = orig
        if pattern and not (up_pattern == base == down_pattern):
            continue
        n_vals.append((up - down) / (2 * eps))
        a_vals.append(float(analytic[which].reshape(-1)[idx]))
    if not a_vals:
        raise ValueError("every perturbation crossed a kink; nothing to compare")
    a, n = np.array(a_vals), np.array(n_vals)
    if elementwise:
        return float(np.max(np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)))
    return float(np.linalg.norm(a - n) / max(np.linalg.norm(a), np.linalg.norm(n), floor))
