# %% [markdown]
# # Speech template
#
# The generator does not start from noise. It refines a template: a pulse
# train at the tracked pitch in voiced frames and low-level noise in
# unvoiced ones, both scaled by the frame intensity taken from the mel
# spectrogram.

# %%
import numpy as np

from refinevoc import MelParamSet, PitchCurve, TemplateConfig, Waveform, mel_spectrogram
from refinevoc.speech_template import template_for

SR = 44100
HOP = 256
n = SR
t = np.arange(n) / SR
wave = Waveform(0.4 * np.sin(2 * np.pi * 220 * t) * (t < 0.6), SR)
mel = mel_spectrogram(wave, MelParamSet())

# %% [markdown]
# A synthetic pitch curve keeps the example self-contained: 220 Hz for the
# first 0.6 s and unvoiced after.

# %%
frames = mel.n_frames
f0 = np.where(np.arange(frames) * HOP / SR < 0.6, 220.0, 0.0)
template = template_for(PitchCurve(f0, HOP, SR), mel, n, TemplateConfig(noise_amp=0.1))
gaps = np.diff(template.pulse_positions)
print("pulses:", len(template.pulse_positions))
print("pulse spacing (samples):", sorted(set(gaps.tolist())), "expected about", round(SR / 220, 2))

# %% [markdown]
# The spacing alternates between 200 and 201 samples because the phase
# accumulator carries the fractional part from one period to the next.
# The noise in unvoiced frames is scaled by the frame intensity. After
# 0.6 s the input is silent, so the template is silent too.

# %%
tail = template.samples[int(0.65 * SR):]
print("peak of the unvoiced tail:", round(float(np.abs(tail).max()), 4))
