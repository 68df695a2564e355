# %% [markdown]
# # Losses
#
# The generator objective adds three terms: a multi-resolution log-mel
# error weighted by lambda, an envelope term that compares upper and lower
# max-pool envelopes, and the adversarial term. The discriminators use the
# usual softplus form.

# %%
import math

import numpy as np
import torch

from refinevoc import Waveform, adversarial_g_loss, discriminator_loss, envelope_loss, multi_mel_loss

SR = 44100
t = np.arange(SR // 2) / SR
y = Waveform(0.6 * np.sin(2 * np.pi * 441 * t), SR)

# %% [markdown]
# ## Spectral and envelope terms
#
# A DC offset of 0.1 lifts the upper envelope by 0.1 and lowers the
# reversed one by 0.1, so the envelope loss is 0.2.

# %%
shifted = Waveform(y.samples + 0.1, SR)
print("mel(y, y):", float(multi_mel_loss(y, y)))
print("envelope(y, y + 0.1):", round(float(envelope_loss(y, shifted)), 6))

flipped = Waveform(-y.samples, SR)
print("mel(y, -y):", f"{float(multi_mel_loss(y, flipped)):.2e}", " envelope(y, -y):",
      f"{float(envelope_loss(y, flipped)):.2e}")

# %% [markdown]
# Polarity reversal leaves the mel term exactly unchanged. For a symmetric
# sine the envelope term only sees the edge frames, while for a sawtooth
# the upper and lower envelopes differ and the term is large.

# %%
saw = Waveform(0.8 * ((t * 300) % 1.0) - 0.2, SR)
print("envelope(saw, -saw):", round(float(envelope_loss(saw, Waveform(-saw.samples, SR))), 4))

# %% [markdown]
# ## Adversarial terms
#
# With every score at zero the discriminators cannot tell real from fake:
# each family contributes `log 2` to the generator loss and `2 log 2` to the
# discriminator loss.

# %%
mpd = [torch.zeros(1, 1, 8, p) for p in (2, 3, 5, 7, 11)]
mrd = [torch.zeros(1, 1, 10, 16) for _ in range(3)]
g = float(adversarial_g_loss(mpd, mrd))
d, parts = discriminator_loss(mpd, mpd, mrd, mrd)
print(f"generator {g:.6f} = 2 log 2 = {2 * math.log(2):.6f}")
print(f"discriminator {float(d):.6f} = 4 log 2 = {4 * math.log(2):.6f}", parts)
