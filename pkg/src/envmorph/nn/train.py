"""Training loops: autoencoder reconstruction and frozen-encoder mapper fitting.

Both loops are single-threaded and draw every random choice (initialization,
batch order) from generators derived off cfg.seed, so a fixed seed reproduces
loss curves and final parameters bitwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..envelope import Envelope
from ..errors import InvalidArgument, NumericFailure
from ..seeding import NS_TRAIN_LOOP_AE, NS_TRAIN_LOOP_MAPPER, make_rng
from .adam import AdamConfig, AdamState, adam_step
from .losses import LOSSES
from .models import Autoencoder, Mapper, mapper_features


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 64
    steps: int = 20_000  # autoencoder budget
    epochs: int = 10  # mapper budget
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    # RMSE is the default: a pure-L1 objective drives the sigmoid output into
    # exact-zero saturation (constant-magnitude sign gradients + Adam's scale
    # invariance march the background logits past float32 underflow, after
    # which every gradient is exactly zero and training is stuck).
    loss: str = "rmse"
    lr_schedule: str = "cosine"  # "cosine" decays to lr/10; "constant" holds

    def __post_init__(self):
        if self.batch_size < 1:
            raise InvalidArgument("batch_size must be >= 1")
        if self.learning_rate < 0:
            raise InvalidArgument("learning_rate must be >= 0")
        if self.loss not in LOSSES:
            raise InvalidArgument(f"unknown loss {self.loss!r}; options: {sorted(LOSSES)}")
        if self.lr_schedule not in ("cosine", "constant"):
            raise InvalidArgument("lr_schedule must be 'cosine' or 'constant'")


def _lr_at(cfg: TrainConfig, step: int, total: int) -> float:
    if cfg.lr_schedule == "constant" or total <= 1:
        return cfg.learning_rate
    # Cosine decay from lr to lr/10 over the run.
    floor = cfg.learning_rate / 10.0
    cos = 0.5 * (1.0 + math.cos(math.pi * step / (total - 1)))
    return floor + (cfg.learning_rate - floor) * cos


def _as_envelope_array(dataset) -> np.ndarray:
    if isinstance(dataset, np.ndarray):
        data = np.ascontiguousarray(dataset, dtype=np.float32)
    else:
        data = np.stack([e.frames if isinstance(e, Envelope) else np.asarray(e) for e in dataset])
        data = np.ascontiguousarray(data, dtype=np.float32)
    if data.ndim != 2:
        raise InvalidArgument("dataset must be a [count, frames] array of envelopes")
    return data


def train_autoencoder(dataset, cfg: TrainConfig) -> tuple[Autoencoder, np.ndarray]:
    """Adam-optimize reconstruction; returns (model, loss log as [step, loss] rows).

    A non-finite loss aborts with NumericFailure before the offending update,
    so the model holds the last good parameters.
    """
    data = _as_envelope_array(dataset)
    if data.shape[0] < cfg.batch_size:
        raise InvalidArgument("dataset smaller than one batch")
    model = Autoencoder(cfg.seed)
    params = model.parameters()
    state = AdamState(params)
    adam_cfg = AdamConfig(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)
    loss_fn = LOSSES[cfg.loss]
    rng = make_rng(cfg.seed, NS_TRAIN_LOOP_AE)
    log = np.empty((cfg.steps, 2), dtype=np.float64)
    for step in range(cfg.steps):
        idx = rng.integers(0, data.shape[0], cfg.batch_size)
        batch = data[idx]
        pred, caches = model.forward_train(batch)
        loss, d_pred = loss_fn(pred, batch)
        if not math.isfinite(loss):
            raise NumericFailure(f"non-finite loss at step {step}; model holds last good state")
        grads = model.backward_train(d_pred, caches)
        adam_step(params, grads, state, adam_cfg, lr=_lr_at(cfg, step, cfg.steps))
        log[step] = (step, loss)
    return model, log


def encode_dataset(model: Autoencoder, frames: np.ndarray, chunk: int = 512) -> np.ndarray:
    out = np.empty((frames.shape[0], 64), dtype=np.float32)
    for lo in range(0, frames.shape[0], chunk):
        out[lo : lo + chunk] = model.encode_batch(frames[lo : lo + chunk])
    return out


def train_mapper(tuples, autoencoder: Autoencoder, cfg: TrainConfig):
    """Fit the mapper to predict encode(E_morph); the autoencoder stays frozen.

    Returns (mapper, loss log as [step, loss] rows, per-epoch mean losses).
    """
    if not tuples:
        raise InvalidArgument("mapper training requires a non-empty tuple dataset")
    frozen = [p.copy() for p in autoencoder.parameters()]

    z_a = encode_dataset(autoencoder, np.stack([t.e_a.frames for t in tuples]))
    z_b = encode_dataset(autoencoder, np.stack([t.e_b.frames for t in tuples]))
    z_m = encode_dataset(autoencoder, np.stack([t.e_morph.frames for t in tuples]))
    alphas = np.array([t.alpha for t in tuples], dtype=np.float64)

    n = len(tuples)
    features = np.empty((n, 3 * 64), dtype=np.float32)
    for i in range(n):
        features[i] = mapper_features(z_a[i], z_b[i], float(alphas[i]))

    mapper = Mapper(cfg.seed)
    params = mapper.parameters()
    state = AdamState(params)
    adam_cfg = AdamConfig(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)
    loss_fn = LOSSES["rmse"]
    rng = make_rng(cfg.seed, NS_TRAIN_LOOP_MAPPER)

    steps_per_epoch = max(n // cfg.batch_size, 1)
    total_steps = cfg.epochs * steps_per_epoch
    log = np.empty((total_steps, 2), dtype=np.float64)
    epoch_means = np.empty(cfg.epochs, dtype=np.float64)
    step = 0
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        epoch_losses = []
        for b in range(steps_per_epoch):
            idx = perm[b * cfg.batch_size : (b + 1) * cfg.batch_size]
            pred, caches = mapper.forward_train(features[idx])
            loss, d_pred = loss_fn(pred, z_m[idx])
            if not math.isfinite(loss):
                raise NumericFailure(f"non-finite mapper loss at step {step}")
            grads = mapper.backward_train(d_pred, caches)
            adam_step(params, grads, state, adam_cfg, lr=_lr_at(cfg, step, total_steps))
            log[step] = (step, loss)
            epoch_losses.append(loss)
            step += 1
        epoch_means[epoch] = float(np.mean(epoch_losses))

    for before, after in zip(frozen, autoencoder.parameters()):
        if not np.array_equal(before, after):
            raise NumericFailure("frozen-encoder contract violated: autoencoder changed")
    return mapper, log, epoch_means
