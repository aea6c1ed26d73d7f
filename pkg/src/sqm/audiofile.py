"""Monaural WAV input/output with explicit SPL calibration.

File samples are mapped to pascals through one full-scale convention: a
full-scale sinusoid corresponds to ``fullscale_db`` dB SPL (default 94,
i.e. roughly 1 Pa rms).  Supported encodings are PCM 16/24-bit and 32-bit
float, single channel only.
"""

from __future__ import annotations

import math
import struct
import wave

import numpy as np
from scipy.io import wavfile

from .signals import CalibratedSignal, P_REF

DEFAULT_FULLSCALE_DB = 94.0


class AudioFileError(ValueError):
    """Raised for unsupported or malformed audio files."""


def _fullscale_peak_pa(fullscale_db: float) -> float:
    # full-scale sinusoid (peak 1.0) has rms 1/sqrt(2) at fullscale_db SPL
    return math.sqrt(2.0) * P_REF * 10.0 ** (fullscale_db / 20.0)


def read_audio(path, fullscale_db: float = DEFAULT_FULLSCALE_DB) -> CalibratedSignal:
    """Read a mono WAV file and calibrate its samples to pascals."""
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise AudioFileError(f"cannot read {path}: {exc}") from exc
    if data.ndim != 1:
        raise AudioFileError(
            f"{path} has {data.shape[1]} channels; only monaural input is supported")
    if data.dtype == np.int16:
        x = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        # 24-bit PCM arrives left-justified in int32
        x = data.astype(np.float64) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        x = data.astype(np.float64)
    elif data.dtype == np.uint8:
        raise AudioFileError(f"{path}: unsupported encoding (8-bit PCM)")
    else:
        raise AudioFileError(f"{path}: unsupported sample format {data.dtype}")
    return CalibratedSignal(x * _fullscale_peak_pa(fullscale_db), float(rate))


def write_audio(path, signal: CalibratedSignal, encoding: str = "float32",
                fullscale_db: float = DEFAULT_FULLSCALE_DB) -> None:
    """Write a signal to WAV, mapping pascals back to file samples.

    ``encoding`` is one of ``pcm16``, ``pcm24``, ``float32``.  Samples
    beyond full scale are clipped for the PCM encodings.
    """
    x = signal.samples / _fullscale_peak_pa(fullscale_db)
    rate = int(round(signal.sample_rate))
    if encoding == "float32":
        wavfile.write(path, rate, x.astype(np.float32))
    elif encoding == "pcm16":
        q = np.clip(np.rint(x * 32768.0), -32768, 32767).astype(np.int16)
        wavfile.write(path, rate, q)
    elif encoding == "pcm24":
        q = np.clip(np.rint(x * 8388608.0), -8388608, 8388607).astype(np.int64)
        frames = b"".join(struct.pack("<i", int(v))[:3] for v in q)
        with wave.open(str(path), "wb") as fh:
            fh.setnchannels(1)
            fh.setsampwidth(3)
            fh.setframerate(rate)
            fh.writeframes(frames)
    else:
        raise AudioFileError(f"unknown encoding {encoding!r}")
