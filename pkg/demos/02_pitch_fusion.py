# %% [markdown]
# # Pitch tracking with ZCR-guided fusion
#
# Two normalized cross-correlation trackers run side by side. The fine one
# uses a permissive voicing threshold and parabolic refinement, the coarse
# one is stricter. Where the smoothed zero-crossing rate is rising and the
# coarse tracker hears no pitch, the fused curve is forced to zero. That
# removes the spurious pitch the fine tracker reports at noisy onsets.

# %%
import numpy as np

from refinevoc import PitchFusionConfig, Waveform, estimate_pitch
from refinevoc.pitch_track import estimate_base_coarse, estimate_base_fine, zcr_trend

SR = 44100
rng = np.random.default_rng(0)
t = np.arange(SR) / SR
vowel = sum(np.sin(2 * np.pi * 180 * k * t) / k for k in range(1, 8))
vowel = 0.3 * vowel / np.abs(vowel).max()
breath = 0.05 * rng.standard_normal(SR // 2)
wave = Waveform(np.concatenate([vowel, breath, vowel]), SR)

# %% [markdown]
# ## The two base trackers

# %%
fine = estimate_base_fine(wave)
coarse = estimate_base_coarse(wave)
print("frames:", len(fine))
print("voiced frames, fine:", int(np.count_nonzero(fine.f0)), " coarse:", int(np.count_nonzero(coarse.f0)))

# %% [markdown]
# ## Fusion
#
# `gamma` is the threshold on the derivative of the smoothed ZCR. The
# trend is large right where the breath noise starts.

# %%
cfg = PitchFusionConfig()
trend = zcr_trend(wave, cfg).values
print("largest ZCR rise at", round(float(np.argmax(trend)) * cfg.zcr_hop / SR, 3), "s")

fused = estimate_pitch(wave, 256, cfg)
centre = np.arange(len(fused)) * 256 / SR
noise = (centre > 1.05) & (centre < 1.45)
voiced = (centre > 0.05) & (centre < 0.95)
print("voiced frames inside the noise, fused:", int(np.count_nonzero(fused.f0[noise])))
print("median f0 of the vowel:", round(float(np.median(fused.f0[voiced])), 2), "Hz")
