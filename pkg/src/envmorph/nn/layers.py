"""Neural layers with explicit forward/backward passes.

Convolutional activations use a channels-major [C, B, L] layout so each kernel
tap reduces to one BLAS matmul over the flattened batch/time axes. Parameters
are float32; float64 instances (for finite-difference checks) are supported by
constructing layers with dtype=np.float64.
"""

from __future__ import annotations

import numpy as np

from ..errors import InvalidArgument


def _he_uniform(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Conv1d:
    """1-D cross-correlation with odd kernel, zero padding, integer stride.

    Kernel weights are stored per tap as W[k] in R^{out x in}, so the forward
    pass is a sum of K shifted matmuls. Output length is L / stride (L must be
    divisible by the stride).
    """

    kind = "conv1d"

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        stride: int = 1,
        kernel_size: int | None = None,
        *,
        bias: bool = True,
        dtype=np.float32,
        rng: np.random.Generator | None = None,
    ):
        if kernel_size is None:
            kernel_size = 2 * stride + 1
        if kernel_size % 2 != 1:
            raise InvalidArgument("kernel_size must be odd")
        if stride < 1:
            raise InvalidArgument("stride must be >= 1")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.stride = stride
        self.kernel_size = kernel_size
        self.pad = (kernel_size - 1) // 2
        self.dtype = np.dtype(dtype)
        fan_in = in_channels * kernel_size
        if rng is None:
            self.weight = np.zeros((kernel_size, out_channels, in_channels), dtype=self.dtype)
        else:
            self.weight = _he_uniform(rng, (kernel_size, out_channels, in_channels), fan_in, self.dtype)
        self.bias = np.zeros(out_channels, dtype=self.dtype) if bias else None

    def params(self):
        return [self.weight] + ([self.bias] if self.bias is not None else [])

    def descriptor(self):
        return {
            "kind": self.kind,
            "in": self.in_channels,
            "out": self.out_channels,
            "stride": self.stride,
            "kernel": self.kernel_size,
            "bias": self.bias is not None,
        }

    def _pad_input(self, x: np.ndarray) -> np.ndarray:
        c, b, length = x.shape
        xp = np.zeros((c, b, length + 2 * self.pad), dtype=x.dtype)
        xp[:, :, self.pad : self.pad + length] = x
        return xp

    def forward(self, x: np.ndarray):
        c, b, length = x.shape
        if c != self.in_channels:
            raise InvalidArgument(f"expected {self.in_channels} input channels, got {c}")
        if length % self.stride != 0:
            raise InvalidArgument(f"input length {length} not divisible by stride {self.stride}")
        l_out = length // self.stride
        xp = self._pad_input(x)
        w = self.weight.astype(x.dtype, copy=False)
        y = np.zeros((self.out_channels, b, l_out), dtype=x.dtype)
        y_flat = y.reshape(self.out_channels, b * l_out)
        if self.stride == 1:
            xp_flat = xp.reshape(c, -1)
            lp = xp.shape[2]
            full = np.empty((self.out_channels, b, lp), dtype=x.dtype)
            full_flat = full.reshape(self.out_channels, -1)
            for k in range(self.kernel_size):
                np.dot(w[k], xp_flat, out=full_flat)
                y += full[:, :, k : k + l_out]
        else:
            for k in range(self.kernel_size):
                xk = np.ascontiguousarray(xp[:, :, k : k + self.stride * l_out : self.stride])
                y_flat += w[k] @ xk.reshape(c, b * l_out)
        if self.bias is not None:
            y += self.bias.astype(x.dtype, copy=False)[:, None, None]
        return y, xp

    def backward(self, cache, dy: np.ndarray):
        if self.stride == 1:
            dx, dw = self._backward_stacked(cache, dy)
        else:
            dx, dw = self._backward_strided(cache, dy)
        grads = [dw.astype(self.weight.dtype, copy=False)]
        if self.bias is not None:
            grads.append(dy.sum(axis=(1, 2)).astype(self.bias.dtype, copy=False))
        return dx, grads

    def _backward_stacked(self, xp: np.ndarray, dy: np.ndarray):
        # Stack the K shifted views of dy once, then compute dW and dx as two
        # GEMMs against the padded input. Stacking the dy side is cheap for
        # the long stride-1 layers where out_channels <= in_channels.
        k_size = self.kernel_size
        p = self.pad
        o, b, l_out = dy.shape
        c = self.in_channels
        lp = xp.shape[2]
        dyp = np.zeros((o, b, l_out + 4 * p), dtype=dy.dtype)
        dyp[:, :, 2 * p : 2 * p + l_out] = dy
        stack = np.empty((k_size, o, b, lp), dtype=dy.dtype)
        for k in range(k_size):
            stack[k] = dyp[:, :, 2 * p - k : 2 * p - k + lp]
        stack_flat = stack.reshape(k_size * o, b * lp)
        xp_flat = xp.reshape(c, b * lp)
        dw = (stack_flat @ xp_flat.T).reshape(k_size, o, c)
        w2 = self.weight.astype(dy.dtype, copy=False).reshape(k_size * o, c)
        dx_full = (w2.T @ stack_flat).reshape(c, b, lp)
        dx = np.ascontiguousarray(dx_full[:, :, p : p + l_out])
        return dx, dw

    def _backward_strided(self, xp: np.ndarray, dy: np.ndarray):
        c = self.in_channels
        o, b, l_out = dy.shape
        w = self.weight.astype(dy.dtype, copy=False)
        dy_flat = dy.reshape(o, b * l_out)
        dxp = np.zeros_like(xp)
        dw = np.empty((self.kernel_size, o, c), dtype=dy.dtype)
        for k in range(self.kernel_size):
            sl = slice(k, k + self.stride * l_out, self.stride)
            xk = xp[:, :, sl].reshape(c, -1)  # copies when non-contiguous
            dw[k] = dy_flat @ xk.T
            dxp[:, :, sl] += (w[k].T @ dy_flat).reshape(c, b, l_out)
        dx = np.ascontiguousarray(dxp[:, :, self.pad : xp.shape[2] - self.pad])
        return dx, dw


class Dense:
    kind = "dense"

    def __init__(
        self,
        in_features: int,
        out_features: int,
        *,
        bias: bool = True,
        dtype=np.float32,
        rng: np.random.Generator | None = None,
    ):
        self.in_features = in_features
        self.out_features = out_features
        self.dtype = np.dtype(dtype)
        if rng is None:
            self.weight = np.zeros((in_features, out_features), dtype=self.dtype)
        else:
            self.weight = _he_uniform(rng, (in_features, out_features), in_features, self.dtype)
        self.bias = np.zeros(out_features, dtype=self.dtype) if bias else None

    def params(self):
        return [self.weight] + ([self.bias] if self.bias is not None else [])

    def descriptor(self):
        return {
            "kind": self.kind,
            "in": self.in_features,
            "out": self.out_features,
            "bias": self.bias is not None,
        }

    def forward(self, x: np.ndarray):
        if x.shape[1] != self.in_features:
            raise InvalidArgument(f"expected {self.in_features} features, got {x.shape[1]}")
        y = x @ self.weight.astype(x.dtype, copy=False)
        if self.bias is not None:
            y += self.bias.astype(x.dtype, copy=False)
        return y, x

    def backward(self, cache, dy: np.ndarray):
        x = cache
        w = self.weight.astype(dy.dtype, copy=False)
        dx = dy @ w.T
        grads = [(x.T @ dy).astype(self.weight.dtype, copy=False)]
        if self.bias is not None:
            grads.append(dy.sum(axis=0).astype(self.bias.dtype, copy=False))
        return dx, grads


class ReLU:
    kind = "relu"

    def params(self):
        return []

    def descriptor(self):
        return {"kind": self.kind}

    def forward(self, x: np.ndarray):
        mask = x > 0
        return x * mask, mask

    def backward(self, cache, dy: np.ndarray):
        return dy * cache, []


class Sigmoid:
    kind = "sigmoid"

    def params(self):
        return []

    def descriptor(self):
        return {"kind": self.kind}

    def forward(self, x: np.ndarray):
        # Branch on sign for overflow safety.
        y = np.empty_like(x)
        pos = x >= 0
        y[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        y[~pos] = ex / (1.0 + ex)
        return y, y

    def backward(self, cache, dy: np.ndarray):
        y = cache
        return dy * y * (1.0 - y), []


class NearestUpsample:
    kind = "upsample"

    def __init__(self, factor: int):
        if factor < 1:
            raise InvalidArgument("upsample factor must be >= 1")
        self.factor = factor

    def params(self):
        return []

    def descriptor(self):
        return {"kind": self.kind, "factor": self.factor}

    def forward(self, x: np.ndarray):
        return np.repeat(x, self.factor, axis=2), x.shape

    def backward(self, cache, dy: np.ndarray):
        c, b, l_in = cache
        return dy.reshape(c, b, l_in, self.factor).sum(axis=3), []
