# %% [markdown]
# # Signal front end
#
# The mel spectrogram is the conditioning input of the vocoder, and the
# same STFT machinery feeds the spectral losses. This walk-through builds a
# two-tone test signal, inspects its mel frames and checks the resampler
# on a band-limited sweep.

# %%
import numpy as np

from refinevoc import MelParamSet, Waveform, kaiser_resample, mel_spectrogram
from refinevoc.signal_core import envelope, hz_to_mel, zero_crossing_rate

SR = 44100
t = np.arange(SR // 2) / SR
wave = Waveform(0.4 * np.sin(2 * np.pi * 220 * t) + 0.2 * np.sin(2 * np.pi * 3300 * t), SR)

# %% [markdown]
# ## Mel frames
#
# With the default parameters (2048-point FFT, hop 256, 128 bands) a
# half-second clip gives `n // hop + 1` frames. The two tones show up as
# the two loudest bands.

# %%
params = MelParamSet()
mel = mel_spectrogram(wave, params)
print("log-mel shape:", mel.log_mels.shape)

band_centres = np.linspace(hz_to_mel(params.f_min), hz_to_mel(SR / 2), params.n_mels + 2)[1:-1]
loudest = np.argsort(mel.log_mels[:, mel.n_frames // 2])[-2:]
print("loudest bands (mel):", np.round(np.sort(band_centres[loudest])))
print("220 Hz and 3300 Hz on the mel scale:", np.round(hz_to_mel(np.array([220.0, 3300.0]))))

# %% [markdown]
# ## Frame-level curves
#
# Zero-crossing rate and the max-pool envelope are the other two per-frame
# descriptors. The ZCR of a pure tone sits at twice its frequency over the
# sample rate.

# %%
zcr = zero_crossing_rate(Waveform(np.sin(2 * np.pi * 441 * t), SR)).values
print("ZCR of 441 Hz:", round(float(np.median(zcr)), 4), "expected", 2 * 441 / SR)
print("envelope peak:", round(float(envelope(wave).values.max()), 3))

# %% [markdown]
# ## Resampling
#
# The Kaiser-windowed sinc resampler keeps the passband and removes what
# would alias. Downsampling a tone above the new Nyquist frequency leaves
# almost nothing behind.

# %%
low = kaiser_resample(Waveform(0.5 * np.sin(2 * np.pi * 1000 * t), SR), 16000)
alias = kaiser_resample(Waveform(0.5 * np.sin(2 * np.pi * 12000 * t), SR), 16000)
inner = slice(200, -200)
print("1 kHz tone after 44.1k -> 16k, RMS:", round(float(np.sqrt(np.mean(low.samples[inner] ** 2))), 4))
print("12 kHz tone after 44.1k -> 16k, RMS:", f"{np.sqrt(np.mean(alias.samples[inner] ** 2)):.2e}")
