"""Bias-free classical frontends, manual backpropagation and Adam with warm restarts.

Every layer implements ``forward(x) -> (y, cache)`` and
``backward(cache, grad_y) -> (grad_x, weight_grads)``. No layer has a bias and
the only activation is ReLU, so ``forward(0) == 0`` for every network built
here (the hypersphere-collapse guard).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import FormatError, StateError, StructuralError


def _uniform_init(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Layer:
    n_params = 0

    def __init__(self):
        self.params: list[np.ndarray] = []

    def init(self, rng: np.random.Generator) -> None:
        pass

    def output_shape(self, shape: tuple) -> tuple:
        return shape

    def describe(self) -> str:
        return type(self).__name__


class Conv2d(Layer):
    def __init__(self, in_ch: int, out_ch: int, kernel: int, padding: str = "same"):
        super().__init__()
        self.in_ch, self.out_ch, self.kernel, self.padding = in_ch, out_ch, kernel, padding
        self.params = [np.zeros((out_ch, in_ch, kernel, kernel))]

    @property
    def n_params(self):
        return self.out_ch * self.in_ch * self.kernel ** 2

    def _pad(self):
        return (self.kernel - 1) // 2 if self.padding == "same" else 0

    def init(self, rng):
        self.params = [_uniform_init(rng, self.params[0].shape, self.in_ch * self.kernel ** 2)]

    def output_shape(self, shape):
        c, h, w = shape
        if c != self.in_ch:
            raise StructuralError(f"Conv2d expects {self.in_ch} channels, got {c}")
        p = self._pad()
        return (self.out_ch, h + 2 * p - self.kernel + 1, w + 2 * p - self.kernel + 1)

    def forward(self, x):
        p = self._pad()
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
        win = sliding_window_view(xp, (self.kernel, self.kernel), axis=(2, 3))
        y = np.tensordot(win, self.params[0], axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
        return y, (x.shape, win)

    def backward(self, cache, gy):
        xshape, win = cache
        W = self.params[0]
        gw = np.tensordot(gy, win, axes=([0, 2, 3], [0, 2, 3]))
        dwin = np.tensordot(gy, W, axes=([1], [0]))        # (B, H', W', C, k, k)
        p, k = self._pad(), self.kernel
        B, C, H, Wd = xshape
        Ho, Wo = gy.shape[2], gy.shape[3]
        gxp = np.zeros((B, C, H + 2 * p, Wd + 2 * p))
        for i in range(k):
            for j in range(k):
                gxp[:, :, i:i + Ho, j:j + Wo] += dwin[..., i, j].transpose(0, 3, 1, 2)
        return gxp[:, :, p:p + H, p:p + Wd], [gw]

    def describe(self):
        return f"Conv2d({self.in_ch}->{self.out_ch}, k={self.kernel}, {self.padding})"


class Conv1d(Layer):
    def __init__(self, in_ch: int, out_ch: int, kernel: int, padding: str = "same"):
        super().__init__()
        self.in_ch, self.out_ch, self.kernel, self.padding = in_ch, out_ch, kernel, padding
        self.params = [np.zeros((out_ch, in_ch, kernel))]

    @property
    def n_params(self):
        return self.out_ch * self.in_ch * self.kernel

    def _pad(self):
        return (self.kernel - 1) // 2 if self.padding == "same" else 0

    def init(self, rng):
        self.params = [_uniform_init(rng, self.params[0].shape, self.in_ch * self.kernel)]

    def output_shape(self, shape):
        c, n = shape
        if c != self.in_ch:
            raise StructuralError(f"Conv1d expects {self.in_ch} channels, got {c}")
        return (self.out_ch, n + 2 * self._pad() - self.kernel + 1)

    def forward(self, x):
        p = self._pad()
        xp = np.pad(x, ((0, 0), (0, 0), (p, p)))
        win = sliding_window_view(xp, self.kernel, axis=2)   # (B, C, L', k)
        y = np.tensordot(win, self.params[0], axes=([1, 3], [1, 2])).transpose(0, 2, 1)
        return y, (x.shape, win)

    def backward(self, cache, gy):
        xshape, win = cache
        gw = np.tensordot(gy, win, axes=([0, 2], [0, 2]))
        dwin = np.tensordot(gy, self.params[0], axes=([1], [0]))   # (B, L', C, k)
        p, k = self._pad(), self.kernel
        B, C, L = xshape
        Lo = gy.shape[2]
        gxp = np.zeros((B, C, L + 2 * p))
        for i in range(k):
            gxp[:, :, i:i + Lo] += dwin[..., i].transpose(0, 2, 1)
        return gxp[:, :, p:p + L], [gw]

    def describe(self):
        return f"Conv1d({self.in_ch}->{self.out_ch}, k={self.kernel}, {self.padding})"


class AvgPool(Layer):
    """Non-overlapping average pooling over the trailing spatial axes; remainders are dropped."""

    def __init__(self, size: int, ndim: int):
        super().__init__()
        self.size, self.ndim = size, ndim

    def output_shape(self, shape):
        return shape[:1] + tuple(s // self.size for s in shape[1:])

    def forward(self, x):
        s = self.size
        if self.ndim == 1:
            L = x.shape[2] // s
            y = x[:, :, :L * s].reshape(x.shape[0], x.shape[1], L, s).mean(axis=3)
        else:
            H, W = x.shape[2] // s, x.shape[3] // s
            y = x[:, :, :H * s, :W * s].reshape(x.shape[0], x.shape[1], H, s, W, s).mean(axis=(3, 5))
        return y, x.shape

    def backward(self, cache, gy):
        s = self.size
        gx = np.zeros(cache)
        if self.ndim == 1:
            L = gy.shape[2]
            gx[:, :, :L * s] = np.repeat(gy, s, axis=2) / s
        else:
            H, W = gy.shape[2], gy.shape[3]
            gx[:, :, :H * s, :W * s] = np.repeat(np.repeat(gy, s, axis=2), s, axis=3) / (s * s)
        return gx, []

    def describe(self):
        return f"AvgPool{self.ndim}d({self.size})"


class ReLU(Layer):
    def forward(self, x):
        mask = x > 0
        return x * mask, mask

    def backward(self, cache, gy):
        return gy * cache, []


class Flatten(Layer):
    def output_shape(self, shape):
        return (int(np.prod(shape)),)

    def forward(self, x):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, cache, gy):
        return gy.reshape(cache), []


class Dense(Layer):
    def __init__(self, n_in: int, n_out: int):
        super().__init__()
        self.n_in, self.n_out = n_in, n_out
        self.params = [np.zeros((n_out, n_in))]

    @property
    def n_params(self):
        return self.n_in * self.n_out

    def init(self, rng):
        self.params = [_uniform_init(rng, (self.n_out, self.n_in), self.n_in)]

    def output_shape(self, shape):
        if shape != (self.n_in,):
            raise StructuralError(f"Dense expects ({self.n_in},), got {shape}")
        return (self.n_out,)

    def forward(self, x):
        return x @ self.params[0].T, x

    def backward(self, cache, gy):
        return gy @ self.params[0], [gy.T @ cache]

    def describe(self):
        return f"Dense({self.n_in}->{self.n_out})"


@dataclass
class ForwardCache:
    version: int
    layer_caches: list


class ClassicalNet:
    """Sequential bias-free network over inputs of shape ``(B,) + input_shape``."""

    def __init__(self, layers: Sequence[Layer], input_shape: tuple):
        self.layers = list(layers)
        self.input_shape = tuple(input_shape)
        shape = self.input_shape
        for layer in self.layers:
            shape = layer.output_shape(shape)
        self.output_shape = shape
        self._version = 0

    @property
    def output_dim(self) -> int:
        return int(np.prod(self.output_shape))

    @property
    def n_params(self) -> int:
        return sum(layer.n_params for layer in self.layers)

    def init(self, rng: np.random.Generator) -> None:
        for layer in self.layers:
            layer.init(rng)
        self._version += 1

    @property
    def params(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in layer.params]

    @params.setter
    def params(self, values: Sequence[np.ndarray]) -> None:
        values = list(values)
        for layer in self.layers:
            k = len(layer.params)
            new = [np.array(v, dtype=float) for v in values[:k]]
            for old, v in zip(layer.params, new):
                if old.shape != v.shape:
                    raise StructuralError(f"weight shape {v.shape} != {old.shape}")
            layer.params, values = new, values[k:]
        if values:
            raise StructuralError("too many weight tensors")
        self._version += 1

    def forward(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[1:] != self.input_shape:
            raise StructuralError(f"input shape {x.shape[1:]} != {self.input_shape}")
        caches = []
        for layer in self.layers:
            x, c = layer.forward(x)
            caches.append(c)
        return x.reshape(x.shape[0], -1), ForwardCache(self._version, caches)

    def backward(self, cache: ForwardCache, grad_out) -> list[np.ndarray]:
        if cache is None:
            raise StateError("backward called without a forward cache")
        if cache.version != self._version:
            raise StateError("stale forward cache: weights changed since the forward pass")
        g = np.asarray(grad_out, dtype=float).reshape((-1,) + self.output_shape)
        grads: list[list[np.ndarray]] = []
        for layer, c in zip(reversed(self.layers), reversed(cache.layer_caches)):
            g, gw = layer.backward(c, g)
            grads.append(gw)
        return [w for gw in reversed(grads) for w in gw]

    def frobenius_sq(self) -> float:
        return float(sum(np.sum(w * w) for w in self.params))

    def describe(self) -> list[str]:
        return [layer.describe() for layer in self.layers]


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class CosineWarmRestarts:
    """Cosine decay from ``lr_max`` to ``lr_min`` over ``period`` steps, then reset."""

    lr_max: float = 0.05
    lr_min: float = 0.005
    period: int = 500
    mult: int = 1

    def __call__(self, step: int) -> float:
        t, period = step, self.period
        while t >= period:
            t -= period
            period *= self.mult
        return self.lr_min + 0.5 * (self.lr_max - self.lr_min) * (1 + math.cos(math.pi * t / period))


@dataclass
class OptimizerState:
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_step(state: OptimizerState, params: Sequence[np.ndarray], grads: Sequence[np.ndarray],
              schedule=None, lr: float | None = None, decay: Sequence[float] | None = None):
    """One Adam update at the scheduled rate; returns the new parameter arrays.

    ``decay`` optionally adds ``decay[i] * params[i]`` to gradient ``i`` (for
    callers whose gradients do not already contain the regularizer term).
    """
    if lr is None:
        lr = (schedule or CosineWarmRestarts())(state.step)
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1, c2 = 1 - b1 ** state.step, 1 - b2 ** state.step
    out = []
    for i, (p, g) in enumerate(zip(params, grads)):
        if decay is not None and decay[i]:
            g = g + decay[i] * p
        state.m[i] = b1 * state.m[i] + (1 - b1) * g
        state.v[i] = b2 * state.v[i] + (1 - b2) * g * g
        mhat, vhat = state.m[i] / c1, state.v[i] / c2
        out.append(p - lr * mhat / (np.sqrt(vhat) + state.eps))
    return out


# ---------------------------------------------------------------------------
# checkpoints

_MAGIC = "# nqsvdd-weights v1"


def save_weights(path, tensors: dict) -> None:
    """Text dump: magic line, then per tensor ``tensor <name> <ndim> <dims...>`` and one value line.

    Values are written with ``float.hex`` so a reload is bit-exact.
    """
    lines = [_MAGIC]
    for name, arr in tensors.items():
        arr = np.asarray(arr, dtype=float)
        lines.append(f"tensor {name} {arr.ndim} " + " ".join(str(s) for s in arr.shape))
        lines.append(" ".join(float(v).hex() for v in arr.reshape(-1)))
    Path(path).write_text("\n".join(lines) + "\n")


def load_weights(path) -> dict:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != _MAGIC:
        raise FormatError(f"{path}: not an nqsvdd weight file")
    out = {}
    body = lines[1:]
    if len(body) % 2:
        raise FormatError(f"{path}: truncated weight file")
    for header, values in zip(body[::2], body[1::2]):
        parts = header.split()
        if parts[0] != "tensor":
            raise FormatError(f"{path}: bad header {header!r}")
        name, ndim = parts[1], int(parts[2])
        shape = tuple(int(s) for s in parts[3:3 + ndim])
        flat = np.array([float.fromhex(v) for v in values.split()]) if values.strip() else np.zeros(0)
        if flat.size != int(np.prod(shape)):
            raise FormatError(f"{path}: tensor {name} has {flat.size} values for shape {shape}")
        out[name] = flat.reshape(shape)
    return out
