"""Training losses returning (value, gradient w.r.t. prediction)."""

from __future__ import annotations

import numpy as np


def l1_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    diff = pred - target
    value = float(np.mean(np.abs(diff)))
    grad = np.sign(diff) / diff.size
    return value, grad.astype(pred.dtype, copy=False)


def rmse_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    diff = (pred - target).astype(np.float64)
    value = float(np.sqrt(np.mean(diff * diff)))
    if value == 0.0:
        return 0.0, np.zeros_like(pred)
    grad = diff / (diff.size * value)
    return value, grad.astype(pred.dtype, copy=False)


LOSSES = {"l1": l1_loss, "rmse": rmse_loss}
