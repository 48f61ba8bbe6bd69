"""The four morphing engines behind one interface, plus the alpha-map hook.

All engines consume two envelopes and an interpolation weight alpha in [0, 1]
(alpha = 0 recovers input A). Audio mixing and DTW morphing return the inputs
bitwise at the endpoints; the embedding engines return the autoencoder
reconstruction of the corresponding input.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from .dtw import dtw_align
from .envelope import FRAME_COUNT, Envelope
from .errors import CheckpointMissing, InvalidArgument, InvalidMap
from .nn.models import Autoencoder, Mapper, encode, decode, mapper_forward


class MorphEngineKind(Enum):
    AUDIO_MIX = "audio-mix"
    EMBED_MIX = "embed-mix"
    DTW = "dtw"
    LEARNED = "learned"


def _check_alpha(alpha: float) -> float:
    if not 0.0 <= alpha <= 1.0:
        raise InvalidArgument(f"alpha must lie in [0, 1], got {alpha}")
    return float(alpha)


def audio_mix(e_a: Envelope, e_b: Envelope, alpha: float) -> Envelope:
    """Elementwise linear interpolation (1-alpha) * E_a + alpha * E_b."""
    alpha = _check_alpha(alpha)
    a = e_a.frames.astype(np.float64)
    b = e_b.frames.astype(np.float64)
    mixed = (1.0 - alpha) * a + alpha * b
    return Envelope(mixed.astype(np.float32))


def embed_mix(e_a: Envelope, e_b: Envelope, alpha: float, autoencoder: Autoencoder) -> Envelope:
    """Decode the linear interpolation of the two latents."""
    alpha = _check_alpha(alpha)
    if autoencoder is None:
        raise CheckpointMissing("embed-mix requires a loaded autoencoder")
    z_a = encode(e_a, autoencoder)
    z_b = encode(e_b, autoencoder)
    z = np.float32(1.0 - alpha) * z_a + np.float32(alpha) * z_b
    frames = autoencoder.decode_batch(z.reshape(1, -1))[0]
    return Envelope(np.clip(frames, 0.0, 1.0).astype(np.float32))


@dataclass(frozen=True)
class WarpPath:
    """Monotone alignment between two equal-rate sequences."""

    indices: np.ndarray  # [points, 2] int32, rows (i, j)
    cost: float

    def __post_init__(self):
        idx = np.ascontiguousarray(self.indices, dtype=np.int32)
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)

    def validate(self, n: int = FRAME_COUNT, m: int = FRAME_COUNT) -> None:
        idx = self.indices
        if idx.ndim != 2 or idx.shape[1] != 2 or idx.shape[0] == 0:
            raise InvalidArgument("warp path must be a non-empty [points, 2] array")
        if tuple(idx[0]) != (0, 0) or tuple(idx[-1]) != (n - 1, m - 1):
            raise InvalidArgument("warp path must run from (0, 0) to (n-1, m-1)")
        steps = np.diff(idx, axis=0)
        legal = ((steps[:, 0] == 1) & (steps[:, 1] == 0)) | (
            (steps[:, 0] == 0) & (steps[:, 1] == 1)
        ) | ((steps[:, 0] == 1) & (steps[:, 1] == 1))
        if not np.all(legal):
            raise InvalidArgument("warp path contains an illegal step")


def dtw_path(e_a: Envelope, e_b: Envelope) -> WarpPath:
    """Optimal warping path under squared-difference local cost."""
    cost, path = dtw_align(e_a.frames, e_b.frames)
    return WarpPath(path, cost)


def dtw_morph(e_a: Envelope, e_b: Envelope, alpha: float) -> Envelope:
    """Interpolate warp positions and values along the optimal path.

    Each path point (i, j) contributes position t = (1-alpha) i + alpha j and
    value v = (1-alpha) E_a[i] + alpha E_b[j]; points with equal t are
    averaged and the (t, v) polyline is linearly resampled onto the frame
    grid. Constant-valued groups keep their value untouched, which makes the
    endpoints exact.
    """
    alpha = _check_alpha(alpha)
    path = dtw_path(e_a, e_b).indices
    i = path[:, 0].astype(np.float64)
    j = path[:, 1].astype(np.float64)
    w_b = alpha
    w_a = 1.0 - alpha
    t = w_a * i + w_b * j
    v = w_a * e_a.frames[path[:, 0]].astype(np.float64) + w_b * e_b.frames[path[:, 1]].astype(np.float64)

    starts = np.flatnonzero(np.diff(t) > 0) + 1
    starts = np.concatenate([[0], starts])
    counts = np.diff(np.append(starts, t.size))
    sums = np.add.reduceat(v, starts)
    v_min = np.minimum.reduceat(v, starts)
    v_max = np.maximum.reduceat(v, starts)
    values = np.where(v_min == v_max, v_min, sums / counts)
    positions = t[starts]

    frames = np.interp(np.arange(FRAME_COUNT, dtype=np.float64), positions, values)
    return Envelope(np.clip(frames, 0.0, 1.0).astype(np.float32))


def learned_morph(
    e_a: Envelope, e_b: Envelope, alpha: float, autoencoder: Autoencoder, mapper: Mapper
) -> Envelope:
    """Decode the twin-mapper prediction; endpoints short-circuit to reconstruction."""
    alpha = _check_alpha(alpha)
    if autoencoder is None or mapper is None:
        raise CheckpointMissing("learned morphing requires autoencoder and mapper checkpoints")
    # Endpoint contract: alpha 0/1 must return the reconstruction of the input.
    if alpha == 0.0:
        return decode(encode(e_a, autoencoder), autoencoder)
    if alpha == 1.0:
        return decode(encode(e_b, autoencoder), autoencoder)
    z = mapper_forward(encode(e_a, autoencoder), encode(e_b, autoencoder), alpha, mapper)
    frames = autoencoder.decode_batch(z.reshape(1, -1))[0]
    return Envelope(np.clip(frames, 0.0, 1.0).astype(np.float32))


@dataclass(frozen=True)
class AlphaMap:
    """Monotone [0,1] -> [0,1] reweighting of alpha with fixed endpoints."""

    fn: Callable[[float], float]
    name: str = "custom"

    _PROBE_POINTS = 101

    def __post_init__(self):
        probe = np.linspace(0.0, 1.0, self._PROBE_POINTS)
        values = np.array([float(self.fn(float(x))) for x in probe])
        if values[0] != 0.0 or values[-1] != 1.0:
            raise InvalidMap(f"alpha map {self.name!r} must fix Map(0)=0 and Map(1)=1")
        if np.any(np.diff(values) < 0):
            raise InvalidMap(f"alpha map {self.name!r} is not monotone on the probe grid")
        if values.min() < 0.0 or values.max() > 1.0:
            raise InvalidMap(f"alpha map {self.name!r} leaves [0, 1] on the probe grid")


IDENTITY_MAP = AlphaMap(lambda a: a, name="identity")


def parse_alpha_map(spec: str) -> AlphaMap:
    """Parse CLI map specs: "identity" or "gamma:<exponent>"."""
    if spec == "identity":
        return IDENTITY_MAP
    if spec.startswith("gamma:"):
        try:
            exponent = float(spec.split(":", 1)[1])
        except ValueError as exc:
            raise InvalidMap(f"bad gamma exponent in {spec!r}") from exc
        if exponent <= 0:
            raise InvalidMap("gamma exponent must be positive")
        return AlphaMap(lambda a, g=exponent: float(a**g), name=spec)
    raise InvalidMap(f"unknown alpha map {spec!r}")


def apply_alpha_map(alpha_map: AlphaMap | None, alpha: float) -> float:
    """Compose the configured map with alpha (identity when None)."""
    alpha = _check_alpha(alpha)
    if alpha_map is None:
        return alpha
    return float(alpha_map.fn(alpha))


def morph(
    kind: MorphEngineKind,
    e_a: Envelope,
    e_b: Envelope,
    alpha: float,
    *,
    autoencoder: Autoencoder | None = None,
    mapper: Mapper | None = None,
    alpha_map: AlphaMap | None = None,
) -> Envelope:
    """Uniform entry point over the four engines."""
    alpha = apply_alpha_map(alpha_map, alpha)
    if kind == MorphEngineKind.AUDIO_MIX:
        return audio_mix(e_a, e_b, alpha)
    if kind == MorphEngineKind.EMBED_MIX:
        return embed_mix(e_a, e_b, alpha, autoencoder)
    if kind == MorphEngineKind.DTW:
        return dtw_morph(e_a, e_b, alpha)
    if kind == MorphEngineKind.LEARNED:
        return learned_morph(e_a, e_b, alpha, autoencoder, mapper)
    raise InvalidArgument(f"unknown engine kind {kind!r}")
