import hashlib

import numpy as np
import pytest
from scipy import stats

from conftest import peak_frequency, sine
from refinevoc.augmentation import (
    LoudnessRange,
    ShiftRange,
    loudness_augment,
    make_training_item,
    pitch_shift,
    required_source_length,
    sample_shift,
)
from refinevoc.pitch_track import estimate_pitch
from refinevoc.signal_core import Waveform, peak

SR = 44100


class TestSampleShift:
    def test_degenerate(self, rng):
        assert {sample_shift(rng, ShiftRange(0, 0)) for _ in range(50)} == {0}

    def test_uniform(self, rng):
        draws = np.array([sample_shift(rng) for _ in range(100_000)])
        assert np.all(draws == draws.astype(int))
        assert draws.min() >= -12 and draws.max() <= 12
        counts = np.bincount(draws + 12, minlength=25)
        p = 1 / 25
        sigma = np.sqrt(100_000 * p * (1 - p))
        assert np.all(np.abs(counts - 100_000 * p) <= 3 * sigma)

    def test_range_validation(self):
        with pytest.raises(ValueError):
            ShiftRange(1, 12)
        with pytest.raises(ValueError):
            ShiftRange(-1.5, 2)
        assert 12 in ShiftRange() and 13 not in ShiftRange() and 0.5 not in ShiftRange()


class TestPitchShift:
    def test_identity(self, rng):
        w = Waveform(rng.standard_normal(2000), SR)
        out = pitch_shift(w, 0)
        assert np.sqrt(np.mean((out.samples - w.samples) ** 2)) < 1e-6

    @pytest.mark.parametrize("zeta", [-12, -5, 7, 12])
    def test_frequency_and_length(self, zeta):
        w = sine(440, 1.0)
        out = pitch_shift(w, zeta)
        assert out.sample_rate == SR
        assert abs(len(out) - round(len(w) * 2 ** (-zeta / 12))) <= 1
        assert abs(peak_frequency(out.samples, SR) - 440 * 2 ** (zeta / 12)) <= SR / 8192

    def test_octave_down_doubles_length(self):
        w = sine(440, 0.5)
        assert abs(len(pitch_shift(w, -12)) - 2 * len(w)) <= 1

    @pytest.mark.parametrize("zeta", [-7, 3, 12])
    def test_round_trip(self, zeta):
        t = np.arange(SR // 2) / SR
        x = 0.3 * np.sin(2 * np.pi * 300 * t) + 0.2 * np.sin(2 * np.pi * 1700 * t + 1)
        back = pitch_shift(pitch_shift(Waveform(x, SR), zeta), -zeta).samples
        n = min(len(back), len(x))
        inner = slice(1000, n - 1000)
        assert np.sqrt(np.mean((back[inner] - x[inner]) ** 2)) <= 1e-2


class TestRequiredLength:
    def test_examples(self):
        assert required_source_length(1000, 0) == 1064
        assert required_source_length(131072, 12) == 262144 + 64

    @pytest.mark.parametrize("zeta", range(-12, 13))
    def test_enough_after_shift(self, zeta):
        n = 4096
        span = Waveform(np.zeros(required_source_length(n, zeta)), SR)
        assert len(pitch_shift(span, zeta)) >= n


class TestLoudness:
    def test_bounds_example(self):
        assert LoudnessRange().bounds(0.5) == (0.25, 1.0)

    def test_output_peak_is_draw(self, rng):
        w = Waveform(np.array([0.1, -0.5, 0.3]), SR)
        for _ in range(200):
            out, gain = loudness_augment(w, LoudnessRange(), rng)
            assert 0.25 - 1e-12 <= peak(out) <= 1.0 + 1e-12
            assert abs(peak(out) - gain * 0.5) < 1e-6

    def test_degenerate_is_identity(self, rng):
        w = sine(100, 0.1, amp=0.5)
        out, gain = loudness_augment(w, LoudnessRange(0.1, 1.0, 1.0, 1.0), rng)
        assert gain == 1.0 and np.array_equal(out.samples, w.samples)

    def test_never_above_p_max(self, rng):
        loud = LoudnessRange(0.1, 0.8, 0.5, 2.0)
        for p in rng.uniform(0.06, 1.0, 300):
            w = Waveform(np.array([p, -p / 2]), SR)
            out, _ = loudness_augment(w, loud, rng)
            assert peak(out) <= loud.p_max + 1e-6

    def test_empty_interval_collapses(self, rng):
        # p = 0.01: lo = max(0.1, 0.005) = 0.1 > hi = min(1.0, 0.02) = 0.02
        loud = LoudnessRange()
        assert loud.bounds(0.01) == (0.02, 0.02)
        out, _ = loudness_augment(Waveform(np.array([0.01, 0.0]), SR), loud, rng)
        assert peak(out) == pytest.approx(0.02)

    def test_silence_raises(self, rng):
        with pytest.raises(ValueError, match="silent"):
            loudness_augment(Waveform(np.zeros(10), SR), LoudnessRange(), rng)

    def test_range_validation(self):
        with pytest.raises(ValueError):
            LoudnessRange(p_min=0.0)
        with pytest.raises(ValueError):
            LoudnessRange(r_min=2.0, r_max=1.0)

    def test_peaks_uniform(self, rng):
        w = Waveform(np.array([0.5, -0.25]), SR)
        peaks = np.array([peak(loudness_augment(w, LoudnessRange(), rng)[0]) for _ in range(20_000)])
        assert stats.kstest(peaks, "uniform", args=(0.25, 0.75)).statistic < 0.02


@pytest.fixture(scope="module")
def source():
    return Waveform(np.random.default_rng(5).uniform(-0.5, 0.5, 8000 * 10), 8000)


class TestTrainingItem:
    def test_deterministic(self, source):
        a = make_training_item(source, 2048, ShiftRange(), LoudnessRange(), np.random.default_rng(3), "s")
        b = make_training_item(source, 2048, ShiftRange(), LoudnessRange(), np.random.default_rng(3), "s")
        assert np.array_equal(a.wave.samples, b.wave.samples)
        assert (a.zeta, a.gain, a.source_offset, a.source_id) == (b.zeta, b.gain, b.source_offset, "s")

    def test_length(self, source, rng):
        for _ in range(30):
            assert len(make_training_item(source, 2048, ShiftRange(), LoudnessRange(), rng).wave) == 2048

    def test_default_slice_length(self, rng):
        src = Waveform(rng.uniform(-0.5, 0.5, required_source_length(131072, 12)), SR)
        for _ in range(3):
            assert len(make_training_item(src, 131072, ShiftRange(), LoudnessRange(), rng).wave) == 131072

    def test_too_short(self, rng):
        with pytest.raises(ValueError, match="needs 2112"):
            make_training_item(Waveform(np.ones(2000), SR), 2048, ShiftRange(0, 0), LoudnessRange(), rng)

    @pytest.mark.slow
    def test_items_never_repeat(self):
        # 10^4 items from one 60 s source, at 8 kHz with short slices to keep it quick
        src = Waveform(np.random.default_rng(11).uniform(-0.5, 0.5, 8000 * 60), 8000)
        digests = set()
        for i in range(10_000):
            item = make_training_item(src, 256, ShiftRange(), LoudnessRange(), np.random.default_rng([0, i]))
            digests.add(hashlib.sha1(item.wave.samples.tobytes()).hexdigest())
        assert len(digests) == 10_000

    def test_pitch_support_widens(self):
        sr = 8000
        src = sine(220, 4.0, sr=sr, amp=0.4)
        rng = np.random.default_rng(2)
        medians = {}
        for _ in range(120):
            item = make_training_item(src, 2048, ShiftRange(), LoudnessRange(), rng)
            f0 = estimate_pitch(item.wave, 64, f_floor=60.0, f_ceil=1000.0).f0[4:-4]
            medians[item.zeta] = np.median(f0[f0 > 0])
        assert {-12, 12} <= set(medians)
        for zeta, f in medians.items():
            assert abs(f - 220 * 2 ** (zeta / 12)) <= 0.02 * 220 * 2 ** (zeta / 12)
