"""Layer definitions: forward rules, backward rules and parameter init.

Layers operate on batched NCHW / NC arrays and are stateless apart from their
parameters; every forward returns the cache its backward needs. The ReLU
backward has two rules, the standard one and the guided one used by
guided backpropagation (zero the signal where either the forward input or
the incoming backward signal is negative).
"""

from __future__ import annotations

import numpy as np

from .. import backend

STANDARD = "standard"
GUIDED = "guided"

LAYER_KINDS = ("Dense", "Conv2D", "ReLU", "MaxPool2D", "Flatten", "SkipAdd", "Softmax")


def kaiming_uniform(shape, fan_in: int, rng: np.random.Generator) -> np.ndarray:
    """Fan-in Kaiming-uniform draw, float32."""
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(np.float32)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax, numerically shifted."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


class Layer:
    """Base layer; subclasses set `kind` and implement forward/backward."""

    kind: str = ""
    name: str = ""
    layer_index: int = 0

    @property
    def has_params(self) -> bool:
        return False

    def out_shape(self, in_shape: tuple) -> tuple:
        raise NotImplementedError

    def forward(self, x: np.ndarray):
        raise NotImplementedError

    def backward(self, dy: np.ndarray, cache, rule: str = STANDARD) -> np.ndarray:
        raise NotImplementedError

    def copy(self) -> "Layer":
        clone = type(self).__new__(type(self))
        clone.__dict__.update(self.__dict__)
        if self.has_params:
            clone.w = self.w.copy()
            clone.b = self.b.copy()
        return clone


class Dense(Layer):
    kind = "Dense"

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator | None = None):
        self.in_features = in_features
        self.out_features = out_features
        if rng is None:
            self.w = np.zeros((out_features, in_features), dtype=np.float32)
        else:
            self.w = kaiming_uniform((out_features, in_features), in_features, rng)
        self.b = np.zeros(out_features, dtype=np.float32)

    @property
    def has_params(self) -> bool:
        return True

    @property
    def fan_in(self) -> int:
        return self.in_features

    def out_shape(self, in_shape):
        if in_shape != (self.in_features,):
            raise ValueError(f"{self.name}: expected input ({self.in_features},), got {in_shape}")
        return (self.out_features,)

    def forward(self, x):
        return x @ self.w.T.astype(x.dtype) + self.b.astype(x.dtype), x

    def backward(self, dy, cache, rule=STANDARD):
        return dy @ self.w.astype(dy.dtype)

    def param_grads(self, dy, cache):
        x = cache
        return dy.T @ x, dy.sum(axis=0)


class Conv2D(Layer):
    kind = "Conv2D"

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int, pad: int = 0,
                 rng: np.random.Generator | None = None):
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.pad = pad
        shape = (out_channels, in_channels, kernel_size, kernel_size)
        if rng is None:
            self.w = np.zeros(shape, dtype=np.float32)
        else:
            self.w = kaiming_uniform(shape, in_channels * kernel_size * kernel_size, rng)
        self.b = np.zeros(out_channels, dtype=np.float32)

    @property
    def has_params(self) -> bool:
        return True

    @property
    def fan_in(self) -> int:
        return self.in_channels * self.kernel_size * self.kernel_size

    def out_shape(self, in_shape):
        c, h, w = in_shape
        if c != self.in_channels:
            raise ValueError(f"{self.name}: expected {self.in_channels} channels, got {c}")
        k = self.kernel_size
        return (self.out_channels, h + 2 * self.pad - k + 1, w + 2 * self.pad - k + 1)

    def forward(self, x):
        if x.dtype == np.float32:
            y = backend.conv2d_forward(x, self.w, self.b, self.pad)
        else:
            from .. import _convkernels_py
            y = _convkernels_py.conv2d_forward(x, self.w.astype(x.dtype), self.b.astype(x.dtype), self.pad)
        return y, x

    def backward(self, dy, cache, rule=STANDARD):
        if dy.dtype == np.float32:
            return backend.conv2d_backward_input(dy, self.w, self.pad)
        from .. import _convkernels_py
        return _convkernels_py.conv2d_backward_input(dy, self.w.astype(dy.dtype), self.pad)

    def param_grads(self, dy, cache):
        x = cache
        return backend.conv2d_backward_params(dy, x, self.pad, self.kernel_size, self.kernel_size)


class ReLU(Layer):
    kind = "ReLU"

    def out_shape(self, in_shape):
        return in_shape

    def forward(self, x):
        return np.maximum(x, 0), x

    def backward(self, dy, cache, rule=STANDARD):
        x = cache
        mask = x > 0
        if rule == GUIDED:
            mask = mask & (dy > 0)
        return np.where(mask, dy, np.zeros((), dtype=dy.dtype))


class MaxPool2D(Layer):
    """2x2 stride-2 max pooling over even spatial dims."""

    kind = "MaxPool2D"

    def out_shape(self, in_shape):
        c, h, w = in_shape
        if h % 2 or w % 2:
            raise ValueError(f"{self.name}: pooling needs even spatial dims, got {h}x{w}")
        return (c, h // 2, w // 2)

    def forward(self, x):
        if x.dtype == np.float32:
            y, idx = backend.maxpool2x2_forward(x)
        else:
            from .. import _convkernels_py
            y, idx = _convkernels_py.maxpool2x2_forward(x)
        return y, idx

    def backward(self, dy, cache, rule=STANDARD):
        idx = cache
        if dy.dtype == np.float32:
            return backend.maxpool2x2_backward(dy, idx)
        from .. import _convkernels_py
        return _convkernels_py.maxpool2x2_backward(dy, idx)


class Flatten(Layer):
    kind = "Flatten"

    def out_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def forward(self, x):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, dy, cache, rule=STANDARD):
        return dy.reshape(cache)


class SkipAdd(Layer):
    """Residual marker pair: `begin` captures the signal, `end` adds it back."""

    kind = "SkipAdd"

    def __init__(self, marker: str):
        if marker not in ("begin", "end"):
            raise ValueError(f"SkipAdd marker must be 'begin' or 'end', got {marker!r}")
        self.marker = marker

    def out_shape(self, in_shape):
        return in_shape


class Softmax(Layer):
    kind = "Softmax"

    def out_shape(self, in_shape):
        return in_shape

    def forward(self, x):
        y = softmax(x)
        return y, y

    def backward(self, dy, cache, rule=STANDARD):
        y = cache
        return y * (dy - (dy * y).sum(axis=-1, keepdims=True))
