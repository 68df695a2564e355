import numpy as np
import pytest
from scipy.io import wavfile

from refinevoc.signal_core import Waveform
from refinevoc.wavio import WavError, read_wav, write_wav


@pytest.mark.parametrize("subtype,tol", [("FLOAT", 1e-7), ("PCM_16", 1 / 32768), ("PCM_24", 1 / 2**23)])
def test_round_trip(tmp_path, rng, subtype, tol):
    w = Waveform(rng.uniform(-0.9, 0.9, 1001), 22050)
    write_wav(tmp_path / "a.wav", w, subtype)
    back, got = read_wav(tmp_path / "a.wav")
    assert got == subtype
    assert back.sample_rate == 22050 and len(back) == 1001
    assert np.max(np.abs(back.samples - w.samples)) <= tol


def test_pcm_rewrite_is_bit_identical(tmp_path, rng):
    ints = rng.integers(-32768, 32767, 500).astype(np.int16)
    wavfile.write(tmp_path / "a.wav", 8000, ints)
    w, subtype = read_wav(tmp_path / "a.wav")
    write_wav(tmp_path / "b.wav", w, subtype)
    assert np.array_equal(wavfile.read(tmp_path / "b.wav")[1], ints)


def test_scipy_reads_our_files(tmp_path):
    write_wav(tmp_path / "a.wav", Waveform(np.array([0.0, 0.5, -0.5]), 8000), "FLOAT")
    rate, data = wavfile.read(tmp_path / "a.wav")
    assert rate == 8000 and data.tolist() == [0.0, 0.5, -0.5]


def test_multichannel_keeps_first(tmp_path):
    data = np.stack([np.full(10, 1000), np.full(10, -1000)], axis=1).astype(np.int16)
    wavfile.write(tmp_path / "st.wav", 8000, data)
    with pytest.warns(UserWarning, match="channel 0"):
        w, _ = read_wav(tmp_path / "st.wav")
    assert np.allclose(w.samples, 1000 / 32768)


def test_corrupt_and_missing(tmp_path):
    (tmp_path / "bad.wav").write_bytes(b"RIFF\x10\x00\x00\x00WAVEfmt ")
    with pytest.raises(WavError, match="bad.wav"):
        read_wav(tmp_path / "bad.wav")
    with pytest.raises(FileNotFoundError):
        read_wav(tmp_path / "nope.wav")
