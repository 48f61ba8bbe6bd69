"""Temporal envelope type, extraction pipeline and envelope file I/O.

An envelope is the slow amplitude profile of a 10 s clip, sampled on a fixed
grid of 2048 frames (204.8 Hz). Extraction runs analytic-signal magnitude ->
zero-phase lowpass -> block-mean resampling -> peak normalization, and the
result is clamped to [0, 1].
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import butter, filtfilt

from .errors import CorruptFile, InvalidArgument
from .fileio import atomic_write_bytes

FRAME_COUNT = 2048
FRAME_RATE = 204.8  # frames per second
CLIP_SECONDS = 10.0

# Headroom for filter ringing that survives clamping on the write path.
VALUE_EPS = 1e-6

_ENV1_MAGIC = b"ENV1"
_ENV1_VERSION = 1
_ENV1_HEADER = struct.Struct("<4sIId")  # magic, version, frame count, frame rate


@dataclass(frozen=True)
class AudioClip:
    """Mono PCM audio held as float samples, nominally in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise InvalidArgument("AudioClip requires a non-empty 1-D sample array")
        if not np.all(np.isfinite(samples)):
            raise InvalidArgument("AudioClip samples must be finite")
        if int(self.sample_rate) <= 0:
            raise InvalidArgument(f"sample_rate must be positive, got {self.sample_rate}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class Envelope:
    """Fixed-length non-negative amplitude sequence (2048 frames, 10 s)."""

    frames: np.ndarray

    frame_rate: float = field(default=FRAME_RATE, init=False)
    duration: float = field(default=CLIP_SECONDS, init=False)

    def __post_init__(self):
        frames = np.ascontiguousarray(self.frames, dtype=np.float32)
        if frames.shape != (FRAME_COUNT,):
            raise InvalidArgument(
                f"Envelope requires exactly {FRAME_COUNT} frames, got shape {frames.shape}"
            )
        if not np.all(np.isfinite(frames)):
            raise InvalidArgument("Envelope frames must be finite")
        if frames.min() < 0.0:
            raise InvalidArgument("Envelope frames must be non-negative")
        if frames.max() > 1.0 + VALUE_EPS:
            raise InvalidArgument("Envelope frames must not exceed 1 + 1e-6")
        frames.setflags(write=False)
        object.__setattr__(self, "frames", frames)

    @classmethod
    def zeros(cls) -> "Envelope":
        return cls(np.zeros(FRAME_COUNT, dtype=np.float32))


@dataclass(frozen=True)
class ExtractionConfig:
    lowpass_cutoff: float = 30.0
    target_frames: int = FRAME_COUNT
    filter_order: int = 4
    clip_duration: float = CLIP_SECONDS

    def __post_init__(self):
        if self.lowpass_cutoff <= 0:
            raise InvalidArgument("lowpass_cutoff must be positive")
        if self.lowpass_cutoff >= FRAME_RATE / 2:
            raise InvalidArgument("lowpass_cutoff must be below the envelope Nyquist rate")
        if self.target_frames < 2:
            raise InvalidArgument("target_frames must be >= 2")
        if self.clip_duration <= 0:
            raise InvalidArgument("clip_duration must be positive")


def analytic_magnitude(clip: AudioClip) -> np.ndarray:
    """Instantaneous amplitude |x + iH(x)| via the FFT analytic-signal method.

    The transform runs at the exact signal length (zero-padding would turn a
    constant signal into a rectangular pulse and leak edge ringing into the
    envelope): negative frequencies are zeroed, positive doubled, DC and
    Nyquist kept.
    """
    x = clip.samples
    n = x.size
    if n < 2:
        raise InvalidArgument("analytic_magnitude requires at least 2 samples")
    spectrum = np.fft.fft(x)
    weights = np.zeros(n)
    weights[0] = 1.0
    if n % 2 == 0:
        weights[n // 2] = 1.0
        weights[1 : n // 2] = 2.0
    else:
        weights[1 : (n + 1) // 2] = 2.0
    analytic = np.fft.ifft(spectrum * weights)
    return np.abs(analytic)


def lowpass(signal: np.ndarray, sample_rate: float, cfg: ExtractionConfig) -> np.ndarray:
    """Zero-phase Butterworth lowpass (forward-backward), DC gain 1."""
    signal = np.asarray(signal, dtype=np.float64)
    if signal.ndim != 1 or signal.size == 0:
        raise InvalidArgument("lowpass requires a non-empty 1-D signal")
    if cfg.lowpass_cutoff >= sample_rate / 2:
        raise InvalidArgument(
            f"cutoff {cfg.lowpass_cutoff} Hz must be below Nyquist ({sample_rate / 2} Hz)"
        )
    b, a = butter(cfg.filter_order, cfg.lowpass_cutoff, btype="low", fs=sample_rate)
    try:
        return filtfilt(b, a, signal)
    except ValueError as exc:  # signal shorter than the filter's padding
        raise InvalidArgument(str(exc)) from exc


def resample_frames(signal: np.ndarray, source_rate: float, target_frames: int) -> np.ndarray:
    """Block-mean resampling onto a uniform grid of `target_frames`.

    Block k covers samples [floor(kN/T), floor((k+1)N/T)); an empty block
    (only possible when upsampling) takes the single sample at its left edge.
    """
    signal = np.asarray(signal, dtype=np.float64)
    if signal.ndim != 1 or signal.size == 0:
        raise InvalidArgument("resample_frames requires a non-empty 1-D signal")
    if target_frames < 1:
        raise InvalidArgument("target_frames must be >= 1")
    n = signal.size
    lo = (np.arange(target_frames, dtype=np.int64) * n) // target_frames
    counts = np.maximum(np.diff(np.append(lo, n)), 1)
    sums = np.add.reduceat(signal, lo)
    return sums / counts


def extract_envelope(clip: AudioClip, cfg: ExtractionConfig | None = None) -> Envelope:
    """Full pipeline: pad/truncate -> analytic magnitude -> lowpass -> resample -> clamp."""
    cfg = cfg or ExtractionConfig()
    if cfg.target_frames != FRAME_COUNT:
        raise InvalidArgument("extract_envelope produces fixed 2048-frame envelopes")
    n_target = int(round(cfg.clip_duration * clip.sample_rate))
    if n_target < 2:
        raise InvalidArgument("clip_duration too short at this sample rate")
    samples = clip.samples
    if samples.size < n_target:
        samples = np.concatenate([samples, np.zeros(n_target - samples.size)])
    elif samples.size > n_target:
        samples = samples[:n_target]

    mag = analytic_magnitude(AudioClip(samples, clip.sample_rate))
    smoothed = lowpass(mag, clip.sample_rate, cfg)
    frames = resample_frames(smoothed, clip.sample_rate, cfg.target_frames)

    peak = frames.max()
    if peak > 1.0:
        frames = frames / peak
    frames = np.clip(frames, 0.0, 1.0)
    return Envelope(frames.astype(np.float32))


def rmse(a: Envelope, b: Envelope) -> float:
    """Root-mean-square error over the 2048-frame grid.

    Squared differences are accumulated with numpy's pairwise summation in
    float64, so rmse(a, b) == rmse(b, a) bitwise.
    """
    diff = a.frames.astype(np.float64) - b.frames.astype(np.float64)
    return float(np.sqrt(np.mean(diff * diff)))


def save_envelope(envelope: Envelope, path) -> None:
    header = _ENV1_HEADER.pack(_ENV1_MAGIC, _ENV1_VERSION, FRAME_COUNT, FRAME_RATE)
    payload = envelope.frames.astype("<f4").tobytes()
    atomic_write_bytes(path, header + payload)


def load_envelope(path) -> Envelope:
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < _ENV1_HEADER.size:
        raise CorruptFile(f"{path}: truncated header")
    magic, version, count, frame_rate = _ENV1_HEADER.unpack_from(blob)
    if magic != _ENV1_MAGIC:
        raise CorruptFile(f"{path}: bad magic {magic!r}")
    if version != _ENV1_VERSION:
        raise CorruptFile(f"{path}: unsupported version {version}")
    if count != FRAME_COUNT or frame_rate != FRAME_RATE:
        raise CorruptFile(f"{path}: unexpected geometry ({count} frames @ {frame_rate} Hz)")
    payload = blob[_ENV1_HEADER.size :]
    if len(payload) != FRAME_COUNT * 4:
        raise CorruptFile(f"{path}: payload is {len(payload)} bytes, expected {FRAME_COUNT * 4}")
    frames = np.frombuffer(payload, dtype="<f4").astype(np.float32)
    try:
        return Envelope(frames)
    except InvalidArgument as exc:
        raise CorruptFile(f"{path}: {exc}") from exc
