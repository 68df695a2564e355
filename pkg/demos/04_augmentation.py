# %% [markdown]
# # Training-time augmentation
#
# Each training item is a slice of a source recording that has been shifted
# by a whole number of semitones and then rescaled so its peak lands in a
# random range around the original. The shift resamples the audio, so
# higher pitch means fewer samples.

# %%
import numpy as np

from refinevoc import LoudnessRange, ShiftRange, Waveform, loudness_augment, make_training_item, pitch_shift
from refinevoc.signal_core import peak

SR = 44100
t = np.arange(SR) / SR
tone = Waveform(0.5 * np.sin(2 * np.pi * 440 * t), SR)

# %% [markdown]
# ## Pitch shift

# %%
for zeta in (-12, -5, 0, 7, 12):
    out = pitch_shift(tone, zeta)
    spectrum = np.abs(np.fft.rfft(out.samples[:8192] * np.hanning(8192)))
    peak_hz = np.argmax(spectrum) * SR / 8192
    print(f"zeta {zeta:+3d}: {len(out):6d} samples, peak near {peak_hz:7.1f} Hz "
          f"(target {440 * 2 ** (zeta / 12):7.1f})")

# %% [markdown]
# ## Loudness
#
# The new peak is drawn uniformly from `[max(p_min, r_min p), min(p_max, r_max p)]`
# where `p` is the current peak.

# %%
rng = np.random.default_rng(1)
loud = LoudnessRange()
peaks = [peak(loudness_augment(tone, loud, rng)[0]) for _ in range(2000)]
print("bounds for p = 0.5:", loud.bounds(0.5))
print("observed range:", round(min(peaks), 3), "to", round(max(peaks), 3))

# %% [markdown]
# ## Whole items
#
# A seeded generator makes every item reproducible.

# %%
source = Waveform(np.random.default_rng(2).uniform(-0.5, 0.5, 10 * SR), SR)
item = make_training_item(source, 16384, ShiftRange(), loud, np.random.default_rng(7), "noise")
again = make_training_item(source, 16384, ShiftRange(), loud, np.random.default_rng(7), "noise")
print("zeta", item.zeta, "gain", round(item.gain, 3), "offset", item.source_offset)
print("reproducible:", np.array_equal(item.wave.samples, again.wave.samples))
