"""Tone-sequence stimulus rendering for listening-study style morph audio.

Stimuli are short pure-tone bursts placed on a noise bed. The midpoint of two
stimulus specs averages every numeric parameter (quantity rounds to nearest);
the sequence morph concatenates both inputs back to back.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .envelope import AudioClip
from .errors import InvalidArgument
from .seeding import splitmix64
from .synth import round_half_away


@dataclass(frozen=True)
class ToneSequenceSpec:
    quantity: int
    onset: float
    ioi: float
    tone_freq: float = 440.0
    tone_dur: float = 0.15
    total_dur: float = 6.0
    noise_level: float = 0.01

    def __post_init__(self):
        if self.quantity < 0:
            raise InvalidArgument("quantity must be >= 0")
        if self.onset < 0:
            raise InvalidArgument("onset must be >= 0")
        if self.quantity >= 2 and self.ioi <= 0:
            raise InvalidArgument("ioi must be positive for multi-tone sequences")
        if self.tone_dur <= 0 or self.total_dur <= 0:
            raise InvalidArgument("durations must be positive")
        if self.noise_level < 0:
            raise InvalidArgument("noise_level must be >= 0")

    def last_tone_end(self) -> float:
        if self.quantity == 0:
            return 0.0
        return self.onset + (self.quantity - 1) * self.ioi + self.tone_dur


_RAMP_SECONDS = 0.010  # raised-cosine on/off ramps avoid gating clicks


def _tone_burst(freq: float, dur: float, sample_rate: int) -> np.ndarray:
    n = int(round(dur * sample_rate))
    t = np.arange(n) / sample_rate
    burst = np.sin(2.0 * math.pi * freq * t)
    n_ramp = min(int(round(_RAMP_SECONDS * sample_rate)), n // 2)
    if n_ramp > 0:
        ramp = 0.5 * (1.0 - np.cos(np.pi * np.arange(n_ramp) / n_ramp))
        burst[:n_ramp] *= ramp
        burst[-n_ramp:] *= ramp[::-1]
    return burst


def _render_into(buffer: np.ndarray, spec: ToneSequenceSpec, sample_rate: int, offset: float):
    burst = _tone_burst(spec.tone_freq, spec.tone_dur, sample_rate)
    for k in range(spec.quantity):
        start = int(round((offset + spec.onset + k * spec.ioi) * sample_rate))
        buffer[start : start + burst.size] += burst[: buffer.size - start]


def render_tone_sequence(spec: ToneSequenceSpec, sample_rate: int = 44100, seed: int = 0) -> AudioClip:
    """Pure-tone bursts plus seeded Gaussian noise, peak-normalized to <= 0.9."""
    if spec.tone_freq >= sample_rate / 2:
        raise InvalidArgument("tone frequency must be below Nyquist")
    if spec.last_tone_end() > spec.total_dur:
        raise InvalidArgument(
            f"tones end at {spec.last_tone_end():.3f}s, beyond total_dur {spec.total_dur}s"
        )
    n = int(round(spec.total_dur * sample_rate))
    buffer = np.zeros(n, dtype=np.float64)
    _render_into(buffer, spec, sample_rate, 0.0)
    if spec.noise_level > 0:
        rng = np.random.Generator(np.random.PCG64(seed))
        buffer += rng.normal(0.0, spec.noise_level, n)
    peak = np.abs(buffer).max()
    if peak > 0.9:
        buffer *= 0.9 / peak
    return AudioClip(buffer, sample_rate)


def render_sequence_morph(
    a: ToneSequenceSpec, b: ToneSequenceSpec, sample_rate: int = 44100, seed: int = 0
) -> AudioClip:
    """Both inputs in one clip of duration 2 x total_dur (b offset by total_dur)."""
    if a.total_dur != b.total_dur:
        raise InvalidArgument("sequence morph requires matching total durations")
    first = render_tone_sequence(a, sample_rate, splitmix64(seed ^ 0xA))
    second = render_tone_sequence(b, sample_rate, splitmix64(seed ^ 0xB))
    return AudioClip(np.concatenate([first.samples, second.samples]), sample_rate)


def midpoint_tone_spec(a: ToneSequenceSpec, b: ToneSequenceSpec) -> ToneSequenceSpec:
    """Linear average of every numeric parameter; quantity rounds to nearest."""
    return ToneSequenceSpec(
        quantity=round_half_away((a.quantity + b.quantity) / 2.0),
        onset=(a.onset + b.onset) / 2.0,
        ioi=(a.ioi + b.ioi) / 2.0,
        tone_freq=(a.tone_freq + b.tone_freq) / 2.0,
        tone_dur=(a.tone_dur + b.tone_dur) / 2.0,
        total_dur=(a.total_dur + b.total_dur) / 2.0,
        noise_level=(a.noise_level + b.noise_level) / 2.0,
    )


def count_bursts(samples: np.ndarray, sample_rate: int, threshold_ratio: float = 0.25) -> int:
    """Count tone bursts by thresholding the smoothed rectified signal."""
    x = np.abs(np.asarray(samples, dtype=np.float64))
    win = max(int(0.02 * sample_rate), 1)
    kernel = np.ones(win) / win
    smooth = np.convolve(x, kernel, mode="same")
    gate = smooth > threshold_ratio * smooth.max()
    rises = np.sum(gate[1:] & ~gate[:-1]) + int(gate[0])
    return int(rises)
