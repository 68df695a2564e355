"""Mono WAV reading and writing (PCM 16/24-bit and IEEE float32)."""

from __future__ import annotations

import struct
import warnings
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .signal_core import Waveform

SUBTYPES = ("PCM_16", "PCM_24", "FLOAT")


class WavError(IOError):
    pass


def read_wav(path) -> tuple[Waveform, str]:
    """Read a WAV file into a ``[-1, 1]`` float waveform.

    Returns the waveform and the file's subtype so a caller can write back
    in the same format. Multi-channel files keep channel 0.
    """
    path = Path(path)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", wavfile.WavFileWarning)
            rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except (ValueError, EOFError, struct.error, OSError) as exc:
        raise WavError(f"{path}: unreadable WAV ({exc})") from exc

    if data.ndim == 2:
        warnings.warn(f"{path}: {data.shape[1]} channels, keeping channel 0", stacklevel=2)
        data = data[:, 0]
    if data.dtype == np.int16:
        subtype, samples = "PCM_16", data / 32768.0
    elif data.dtype == np.int32:
        # scipy left-justifies 24-bit samples into int32
        subtype = "PCM_24" if _bits_per_sample(path) == 24 else "PCM_32"
        samples = data / 2147483648.0
    elif data.dtype == np.float32:
        subtype, samples = "FLOAT", data.astype(np.float64)
    elif data.dtype == np.float64:
        subtype, samples = "DOUBLE", data.astype(np.float64)
    elif data.dtype == np.uint8:
        subtype, samples = "PCM_U8", (data.astype(np.float64) - 128.0) / 128.0
    else:
        raise WavError(f"{path}: unsupported sample type {data.dtype}")
    if samples.size == 0:
        raise WavError(f"{path}: no audio frames")
    return Waveform(samples, rate), subtype


def _bits_per_sample(path: Path) -> int:
    with open(path, "rb") as fh:
        head = fh.read(4096)
    pos = head.find(b"fmt ")
    if pos < 0:
        return 0
    return struct.unpack_from("<H", head, pos + 22)[0]


def write_wav(path, wave: Waveform, subtype: str = "FLOAT") -> None:
    """Write ``wave`` as a mono WAV file. PCM subtypes clip to ``[-1, 1)``."""
    samples = np.asarray(wave.samples, dtype=np.float64)
    if subtype == "FLOAT":
        fmt_tag, bits, payload = 3, 32, samples.astype("<f4").tobytes()
    elif subtype == "PCM_16":
        ints = np.clip(np.round(samples * 32768.0), -32768, 32767).astype("<i2")
        fmt_tag, bits, payload = 1, 16, ints.tobytes()
    elif subtype == "PCM_24":
        ints = np.clip(np.round(samples * 8388608.0), -8388608, 8388607).astype("<i4")
        raw = ints.view(np.uint8).reshape(-1, 4)[:, :3]
        fmt_tag, bits, payload = 1, 24, raw.tobytes()
    else:
        raise ValueError(f"unsupported subtype {subtype!r}; choose from {SUBTYPES}")

    block_align = bits // 8
    fmt_chunk = struct.pack(
        "<HHIIHH", fmt_tag, 1, wave.sample_rate, wave.sample_rate * block_align, block_align, bits
    )
    chunks = b"fmt " + struct.pack("<I", len(fmt_chunk)) + fmt_chunk
    if fmt_tag == 3:
        # non-PCM formats carry a fact chunk with the frame count
        chunks += b"fact" + struct.pack("<II", 4, len(samples))
    data = b"data" + struct.pack("<I", len(payload)) + payload
    if len(payload) % 2:
        data += b"\x00"
    body = b"WAVE" + chunks + data
    Path(path).write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)
