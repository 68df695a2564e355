# %% [markdown]
# # Toy-scale training and copy synthesis
#
# The toy preset shrinks everything to run on a laptop CPU: 8 kHz audio,
# hop 4, eight mel bands and a generator with four base channels. This
# demo overfits a short harmonic clip for a few dozen steps, saves a
# checkpoint and resynthesizes the clip from its own features.
# Set `STEPS` higher (500 is plenty) to watch the mel loss collapse.

# %%
import dataclasses
import json
import os
import tempfile
from pathlib import Path

import numpy as np
import torch

from refinevoc import Waveform, multi_mel_loss, toy_config
from refinevoc.pipeline import copy_synthesis, resume, train
from refinevoc.refiner_net import count_parameters

torch.set_num_threads(1)
STEPS = int(os.environ.get("DEMO_STEPS", 40))

sr = 8000
t = np.arange(sr // 2) / sr
f0 = 200 + 20 * np.sin(2 * np.pi * 3 * t)
phase = 2 * np.pi * np.cumsum(f0) / sr
clip = sum(np.sin(k * phase) / k for k in range(1, 18))
clip = 0.3 * clip / np.abs(clip).max() * np.minimum(1, 5 * t) * np.minimum(1, 5 * (0.5 - t))
clip = Waveform(clip + 0.003 * np.random.default_rng(7).standard_normal(t.size), sr)

cfg = toy_config()
cfg = dataclasses.replace(cfg, training=dataclasses.replace(
    cfg.training, steps=STEPS, augment=False, n_slice=len(clip), checkpoint_every=STEPS))

# %% [markdown]
# ## Training
#
# Every step updates the discriminators first and the generator second.
# Metrics go to `metrics.jsonl`, one JSON object per step.

# %%
out = Path(tempfile.mkdtemp(prefix="refinevoc_demo_"))
state = train([("clip", clip)], cfg, out, seed=0)
rows = [json.loads(line) for line in (out / "metrics.jsonl").read_text().splitlines()]
print("generator parameters:", count_parameters(state.generator))
for row in rows[:: max(1, STEPS // 5)] + rows[-1:]:
    print(f"step {row['step']:4d}  lambda*mel {row['loss_mel']:8.2f}  env {row['loss_env']:.3f}  "
          f"adv {row['loss_adv_g']:.3f}  D {row['loss_mpd'] + row['loss_mrd']:.3f}")

# %% [markdown]
# ## Copy synthesis from the checkpoint
#
# The checkpoint carries the run configuration, so resuming needs nothing
# but the file.

# %%
restored, restored_cfg, _ = resume(out / "latest.rvc")
recon = copy_synthesis(clip, restored, restored_cfg)
print("output samples:", len(recon), "input samples:", len(clip))
print("mel loss against the input:", round(float(multi_mel_loss(clip, recon, cfg.mel_loss)), 3))
