import numpy as np
import pytest

from conftest import sine
from refinevoc.augmentation import pitch_shift
from refinevoc.pitch_track import (
    PitchCurve,
    PitchFusionConfig,
    estimate_base_coarse,
    estimate_base_fine,
    estimate_pitch,
    fuse_pitch,
    read_pitch_curve,
    voiced_mask,
    write_pitch_curve,
    zcr_trend,
)
from refinevoc.signal_core import FrameCurve, Waveform, apply_gain

SR = 44100


def interior(curve, margin=8):
    return curve.f0[margin:-margin]


@pytest.fixture(scope="module")
def sine220():
    return sine(220, 2.0)


class TestBaseEstimators:
    def test_coarse_sine(self, sine220):
        f0 = interior(estimate_base_coarse(sine220))
        assert np.mean(np.abs(f0 - 220) <= 0.02 * 220) >= 0.95

    def test_fine_sub_bin_accuracy(self):
        f0 = interior(estimate_base_fine(sine(220.5, 2.0)))
        assert np.median(np.abs(f0 - 220.5)) < 0.5

    @pytest.mark.parametrize("estimator", [estimate_base_coarse, estimate_base_fine])
    def test_silence(self, estimator):
        assert np.all(estimator(Waveform(np.zeros(SR), SR)).f0 == 0)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_noise_mostly_unvoiced(self, seed):
        noise = Waveform(np.random.default_rng(seed).uniform(-0.5, 0.5, SR), SR)
        assert np.mean(estimate_base_coarse(noise).f0 == 0) >= 0.9

    def test_fade_to_silence(self):
        w = sine(220, 1.0)
        fade = np.clip(1.5 - 2 * np.arange(len(w)) / SR, 0, 1)
        f0 = estimate_base_fine(Waveform(w.samples * fade, SR)).f0
        assert np.all(f0[-20:] == 0)
        assert np.all(f0[10:40] > 0)

    def test_step_transition(self):
        w = Waveform(np.concatenate([sine(100, 1.0).samples, sine(200, 1.0).samples]), SR)
        f0 = interior(estimate_base_fine(w))
        near = np.minimum(np.abs(f0 - 100) / 100, np.abs(f0 - 200) / 200)
        assert np.count_nonzero(near > 0.05) <= 3

    def test_too_short(self):
        with pytest.raises(ValueError, match="analysis window"):
            estimate_base_coarse(Waveform(np.zeros(100), SR))

    def test_values_in_range(self, rng):
        x = np.convolve(rng.standard_normal(SR), np.ones(30) / 30, mode="same")
        f0 = estimate_base_fine(Waveform(x, SR)).f0
        assert np.all((f0 == 0) | ((f0 >= 40) & (f0 <= 1600)))

    def test_gain_invariant(self, sine220):
        for est in (estimate_base_coarse, estimate_base_fine):
            a = est(sine220).f0
            b = est(apply_gain(sine220, 2.0)).f0
            np.testing.assert_allclose(a, b, rtol=1e-9)

    def test_pulse_train_no_octave_errors(self):
        t = np.arange(2 * SR) / SR
        x = sum(np.cos(2 * np.pi * 150 * k * t) for k in range(1, 11)) / 10
        f0 = estimate_pitch(Waveform(0.5 * x, SR)).f0
        voiced = f0[f0 > 0]
        assert np.mean(np.abs(voiced - 150) <= 7.5) >= 0.9


class TestFusion:
    def curves(self, fine, coarse, hop=256):
        return PitchCurve(np.asarray(fine, float), hop, SR), PitchCurve(np.asarray(coarse, float), hop, SR)

    def test_constant_zcr_keeps_fine(self, rng):
        n = 40
        wave = Waveform(np.full(n * 256, 0.3), SR)  # no crossings: d == 0
        fine, coarse = self.curves(rng.uniform(100, 300, n + 1), np.zeros(n + 1))
        out = fuse_pitch(fine, coarse, wave)
        assert np.array_equal(out.f0, fine.f0)

    def test_rising_zcr_and_unvoiced_coarse_gives_zero(self):
        # sine then noise: the ZCR jumps at the junction
        rng = np.random.default_rng(3)
        x = np.concatenate([sine(200, 0.5).samples, rng.uniform(-0.5, 0.5, SR // 2)])
        wave = Waveform(x, SR)
        n = len(x) // 256 + 1
        fine, coarse = self.curves(np.full(n, 200.0), np.zeros(n))
        cfg = PitchFusionConfig()
        d = zcr_trend(wave, cfg).values
        out = fuse_pitch(fine, coarse, wave, cfg).f0
        rising = d[:n] > cfg.gamma
        assert rising.any()
        assert np.all(out[rising] == 0)
        assert np.all(out[~rising] == 200.0)
        # with a voiced coarse tracker the same frames keep the fine value
        voiced = fuse_pitch(fine, PitchCurve(np.full(n, 180.0), 256, SR), wave, cfg).f0
        assert np.all(voiced == 200.0)

    def test_zero_fine_propagates(self, rng):
        wave = Waveform(rng.uniform(-1, 1, 10000), SR)
        n = 10000 // 256 + 1
        fine, coarse = self.curves(np.zeros(n), rng.uniform(0, 300, n))
        assert np.all(fuse_pitch(fine, coarse, wave).f0 == 0)

    def test_output_subset_of_fine(self, rng):
        x = np.concatenate([sine(300, 0.4).samples, rng.uniform(-0.3, 0.3, 20000), sine(150, 0.4).samples])
        wave = Waveform(x, SR)
        fine, coarse = estimate_base_fine(wave), estimate_base_coarse(wave)
        out = fuse_pitch(fine, coarse, wave).f0
        assert np.all((out == 0) | (out == fine.f0))

    def test_tie_takes_fine(self, monkeypatch):
        import refinevoc.pitch_track as pt

        cfg = PitchFusionConfig()
        monkeypatch.setattr(pt, "zcr_trend", lambda wave, c: FrameCurve(np.full(11, c.gamma), 256, 512))
        fine, coarse = self.curves(np.full(11, 123.0), np.zeros(11))
        out = fuse_pitch(fine, coarse, Waveform(np.zeros(2560), SR), cfg)
        assert np.all(out.f0 == 123.0)

    def test_grid_mismatch(self):
        wave = Waveform(np.zeros(2560), SR)
        with pytest.raises(ValueError):
            fuse_pitch(PitchCurve(np.zeros(11), 256, SR), PitchCurve(np.zeros(12), 256, SR), wave)
        with pytest.raises(ValueError):
            fuse_pitch(PitchCurve(np.zeros(11), 256, SR), PitchCurve(np.zeros(11), 128, SR), wave)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            PitchFusionConfig(sigma=0)
        with pytest.raises(ValueError):
            PitchFusionConfig(gamma=-1)


@pytest.fixture(scope="module")
def fused():
    x = np.concatenate([sine(220, 1.0).samples, np.zeros(SR), sine(220, 1.0).samples])
    return estimate_pitch(Waveform(x, SR)).f0


class TestToneSilenceTone:
    def test_silence_is_unvoiced(self, fused):
        t = np.arange(len(fused)) * 256 / SR
        silent = (t > 1.0) & (t < 2.0)
        assert np.all(fused[silent] == 0)

    def test_voiced_accuracy(self, fused):
        t = np.arange(len(fused)) * 256 / SR
        voiced = ((t > 0.05) & (t < 0.95)) | ((t > 2.05) & (t < 2.95))
        assert np.mean(np.abs(fused[voiced] - 220) <= 4.4) >= 0.95


def test_pitch_shift_moves_estimate():
    base = sine(220, 1.0)
    for zeta in (-5, 7):
        f0 = interior(estimate_pitch(pitch_shift(base, zeta)))
        expected = 220 * 2 ** (zeta / 12)
        assert abs(np.median(f0[f0 > 0]) - expected) <= 0.02 * expected


def test_voiced_mask():
    assert voiced_mask(PitchCurve(np.array([0, 100, 0.0]), 256, SR)).tolist() == [False, True, False]
    assert voiced_mask(PitchCurve(np.full(5, 120.0), 256, SR)).all()
    assert len(voiced_mask(PitchCurve(np.zeros(7), 256, SR))) == 7


def test_curve_file_round_trip(tmp_path):
    curve = PitchCurve(np.array([0.0, 220.125, 221.5]), 256, SR)
    write_pitch_curve(tmp_path / "a.f0", curve)
    text = (tmp_path / "a.f0").read_text().splitlines()
    assert text[0] == "# hop=256 sr=44100"
    assert text[2] == "1 220.125000"
    back = read_pitch_curve(tmp_path / "a.f0")
    assert np.array_equal(back.f0, curve.f0) and back.hop_size == 256 and back.sample_rate == SR
