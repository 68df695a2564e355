import numpy as np
import pytest
import torch

from refinevoc.signal_core import Waveform

torch.set_num_threads(1)


def sine(freq, seconds, sr=44100, amp=0.5, phase=0.0):
    t = np.arange(int(round(seconds * sr))) / sr
    return Waveform(amp * np.sin(2 * np.pi * freq * t + phase), sr)


def harmonic_clip(seconds=0.5, sr=8000, seed=7):
    """Vibrato harmonic tone with fades and a faint noise floor.

    Seventeen 1/k harmonics on ``f0 = 200 + 20 sin(2 pi 3 t)``. The noise keeps
    every mel band above the log floor so the spectral loss sees the whole band.
    """
    t = np.arange(int(round(seconds * sr))) / sr
    f0 = 200 + 20 * np.sin(2 * np.pi * 3 * t)
    phase = 2 * np.pi * np.cumsum(f0) / sr
    x = sum(np.sin(k * phase) / k for k in range(1, 18))
    x *= np.minimum(1, 5 * t) * np.minimum(1, 5 * (seconds - t))
    x *= 0.3 / np.abs(x).max()
    x += 0.003 * np.random.default_rng(seed).standard_normal(t.size)
    return Waveform(x, sr)


def peak_frequency(samples, sr, n_fft=8192):
    """Frequency of the largest bin of the Hann-windowed spectrum of the middle ``n_fft`` samples."""
    mid = len(samples) // 2
    seg = samples[max(0, mid - n_fft // 2): max(0, mid - n_fft // 2) + n_fft]
    seg = np.pad(seg, (0, n_fft - len(seg)))
    spec = np.abs(np.fft.rfft(seg * np.hanning(n_fft)))
    return np.argmax(spec) * sr / n_fft


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE: list[tuple[int, bool, str]] = []


def report(number, ok, detail):
    """Record one acceptance criterion, then fail the calling test if it did not hold."""
    ACCEPTANCE.append((number, bool(ok), detail))
    print(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, f"criterion {number}: {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
