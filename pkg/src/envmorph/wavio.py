"""WAV ingestion and emission (RIFF/WAVE, PCM 16-bit and IEEE float 32-bit)."""

from __future__ import annotations

import io

import numpy as np
from scipy.io import wavfile

from .envelope import AudioClip
from .errors import InvalidArgument
from .fileio import atomic_write_bytes


def read_wav(path) -> tuple[AudioClip, bool]:
    """Read a WAV file; returns (clip, downmixed).

    Multichannel input is averaged to mono; `downmixed` reports whether that
    happened. Only PCM 16-bit and IEEE float 32-bit encodings are accepted.
    """
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except ValueError as exc:
        raise InvalidArgument(f"{path}: {exc}") from exc

    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise InvalidArgument(
            f"{path}: unsupported sample format {data.dtype}; expected PCM 16-bit or float 32-bit"
        )

    downmixed = False
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
        downmixed = True
    return AudioClip(samples, int(rate)), downmixed


def write_wav(path, samples: np.ndarray, sample_rate: int) -> None:
    """Write mono 16-bit PCM; samples are clipped to [-1, 1] before quantizing."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 1:
        raise InvalidArgument("write_wav expects a mono 1-D sample array")
    pcm = np.clip(samples, -1.0, 1.0)
    pcm = np.round(pcm * 32767.0).astype(np.int16)
    buf = io.BytesIO()
    wavfile.write(buf, int(sample_rate), pcm)
    atomic_write_bytes(path, buf.getvalue())
