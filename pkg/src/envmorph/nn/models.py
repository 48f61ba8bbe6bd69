"""Envelope autoencoder and the order-invariant twin mapper.

The encoder collapses a 2048-frame envelope to a single 64-channel timestep
through five strided convolutions (total downsampling 8*4*4*4*4 = 2048). The
decoder mirrors it with nearest-neighbor upsampling + convolution stages and a
sigmoid output. The mapper is a three-layer MLP over symmetric combinations of
two latents: sum, absolute difference and the alpha-weighted average.
"""

from __future__ import annotations

import numpy as np

from ..envelope import FRAME_COUNT, Envelope
from ..errors import InvalidArgument, NumericFailure
from ..seeding import NS_INIT_AUTOENCODER, NS_INIT_MAPPER, make_rng
from .layers import Conv1d, Dense, NearestUpsample, ReLU, Sigmoid

LATENT_DIM = 64
ENCODER_STRIDES = (8, 4, 4, 4, 4)
ENCODER_CHANNELS = (1, 16, 32, 64, 128, 64)
MAPPER_HIDDEN = 128
MAPPER_INPUT = 3 * LATENT_DIM


def _run_forward(layers, x, collect: bool):
    caches = [] if collect else None
    for layer in layers:
        x, cache = layer.forward(x)
        if collect:
            caches.append(cache)
    return x, caches


def _run_backward(layers, caches, dy):
    grads = []
    for layer, cache in zip(reversed(layers), reversed(caches)):
        dy, layer_grads = layer.backward(cache, dy)
        grads[:0] = layer_grads
    return dy, grads


class Autoencoder:
    kind = "autoencoder"

    def __init__(self, seed: int | None = 0, dtype=np.float32):
        rng = make_rng(seed, NS_INIT_AUTOENCODER) if seed is not None else None
        ch = ENCODER_CHANNELS
        enc: list = []
        for i, stride in enumerate(ENCODER_STRIDES):
            enc.append(Conv1d(ch[i], ch[i + 1], stride, dtype=dtype, rng=rng))
            if i < len(ENCODER_STRIDES) - 1:
                enc.append(ReLU())
        dec: list = []
        rev = ch[::-1]  # 64, 128, 64, 32, 16, 1
        for i, factor in enumerate(ENCODER_STRIDES[::-1]):
            dec.append(NearestUpsample(factor))
            dec.append(Conv1d(rev[i], rev[i + 1], 1, kernel_size=2 * factor + 1, dtype=dtype, rng=rng))
            if i < len(ENCODER_STRIDES) - 1:
                dec.append(ReLU())
        dec.append(Sigmoid())
        if rng is not None:
            # Start the sigmoid output near the envelope background rate
            # instead of 0.5; targets are mostly zero.
            dec[-2].bias[:] = -2.0
        self.encoder = enc
        self.decoder = dec

    @property
    def layers(self):
        return self.encoder + self.decoder

    def parameters(self):
        return [p for layer in self.layers for p in layer.params()]

    def encode_batch(self, envelopes: np.ndarray) -> np.ndarray:
        x = np.ascontiguousarray(envelopes, dtype=self.encoder[0].dtype)
        if x.ndim != 2 or x.shape[1] != FRAME_COUNT:
            raise InvalidArgument(f"expected [batch, {FRAME_COUNT}] envelope array")
        y, _ = _run_forward(self.encoder, x[None, :, :], collect=False)
        z = y[:, :, 0].T  # [B, 64]
        if not np.all(np.isfinite(z)):
            raise NumericFailure("encoder produced non-finite activations")
        return np.ascontiguousarray(z)

    def decode_batch(self, latents: np.ndarray) -> np.ndarray:
        z = np.ascontiguousarray(latents, dtype=self.decoder[1].dtype)
        if z.ndim != 2 or z.shape[1] != LATENT_DIM:
            raise InvalidArgument(f"expected [batch, {LATENT_DIM}] latent array")
        y, _ = _run_forward(self.decoder, z.T[:, :, None], collect=False)
        out = y[0]  # [B, 2048]
        if not np.all(np.isfinite(out)):
            raise NumericFailure("decoder produced non-finite activations")
        return np.ascontiguousarray(out)

    def forward_train(self, envelopes: np.ndarray):
        x = np.ascontiguousarray(envelopes, dtype=self.encoder[0].dtype)[None, :, :]
        z, enc_caches = _run_forward(self.encoder, x, collect=True)
        y, dec_caches = _run_forward(self.decoder, z, collect=True)
        return y[0], (enc_caches, dec_caches)  # [B, 2048]

    def backward_train(self, d_out: np.ndarray, caches):
        enc_caches, dec_caches = caches
        dy = np.ascontiguousarray(d_out)[None, :, :]  # [B, 2048] -> [1, B, 2048]
        dz, dec_grads = _run_backward(self.decoder, dec_caches, dy)
        _, enc_grads = _run_backward(self.encoder, enc_caches, dz)
        return enc_grads + dec_grads


def encode(envelope: Envelope, model: Autoencoder) -> np.ndarray:
    """Map one envelope to its 64-dim latent vector."""
    return model.encode_batch(envelope.frames[None, :])[0]


def decode(latent: np.ndarray, model: Autoencoder) -> Envelope:
    """Map a 64-dim latent back to an envelope (sigmoid keeps values in (0, 1))."""
    latent = np.asarray(latent, dtype=np.float32).reshape(1, -1)
    frames = model.decode_batch(latent)[0]
    return Envelope(frames.astype(np.float32))


class Mapper:
    kind = "mapper"

    def __init__(self, seed: int | None = 0, dtype=np.float32):
        rng = make_rng(seed, NS_INIT_MAPPER) if seed is not None else None
        self.layers = [
            Dense(MAPPER_INPUT, MAPPER_HIDDEN, dtype=dtype, rng=rng),
            ReLU(),
            Dense(MAPPER_HIDDEN, MAPPER_HIDDEN, dtype=dtype, rng=rng),
            ReLU(),
            Dense(MAPPER_HIDDEN, LATENT_DIM, dtype=dtype, rng=rng),
        ]

    def parameters(self):
        return [p for layer in self.layers for p in layer.params()]

    def forward_batch(self, features: np.ndarray) -> np.ndarray:
        y, _ = _run_forward(self.layers, features, collect=False)
        if not np.all(np.isfinite(y)):
            raise NumericFailure("mapper produced non-finite activations")
        return y

    def forward_train(self, features: np.ndarray):
        return _run_forward(self.layers, features, collect=True)

    def backward_train(self, d_out: np.ndarray, caches):
        _, grads = _run_backward(self.layers, caches, d_out)
        return grads


def mapper_features(z_a: np.ndarray, z_b: np.ndarray, alpha: float) -> np.ndarray:
    """Symmetric feature block [z_a + z_b, |z_a - z_b|, alpha*z_a + (1-alpha)*z_b].

    Every block is elementwise-commutative under (swap, alpha -> 1-alpha), so
    the features (and anything computed from them) are order-invariant. The
    weighted average is computed as 0.5*(z_a + z_b) + (alpha - 0.5)*(z_a - z_b)
    so that equal latents reproduce z exactly for any alpha.
    """
    if not 0.0 <= alpha <= 1.0:
        raise InvalidArgument(f"alpha must lie in [0, 1], got {alpha}")
    z_a = np.asarray(z_a, dtype=np.float32)
    z_b = np.asarray(z_b, dtype=np.float32)
    if z_a.shape != z_b.shape:
        raise InvalidArgument("latent shapes must match")
    total = z_a + z_b
    diff = z_a - z_b
    weighted = np.float32(0.5) * total + (np.float32(alpha) - np.float32(0.5)) * diff
    return np.concatenate([total, np.abs(diff), weighted], axis=-1)


def mapper_forward(z_a: np.ndarray, z_b: np.ndarray, alpha: float, model: Mapper) -> np.ndarray:
    """Predicted morph latent for one latent pair."""
    features = mapper_features(z_a, z_b, alpha)
    return model.forward_batch(features.reshape(1, -1))[0]
