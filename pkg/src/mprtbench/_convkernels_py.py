"""Numpy reference kernels for convolution and 2x2 max-pooling.

These are the fallback implementations behind `mprtbench.backend`; the
compiled extension in `_convkernels.pyx` mirrors this exact surface for
float32 inputs. All arrays are NCHW, stride is fixed at 1.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

BACKEND_NAME = "numpy"


def _padded(x: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))


def conv2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray, pad: int) -> np.ndarray:
    """Cross-correlate x [B,C,H,W] with w [F,C,kh,kw], add bias, stride 1."""
    win = sliding_window_view(_padded(x, pad), w.shape[2:], axis=(2, 3))
    y = np.einsum("bchwij,fcij->bfhw", win, w, optimize=True)
    return y + b[None, :, None, None]


def conv2d_backward_input(dy: np.ndarray, w: np.ndarray, pad: int) -> np.ndarray:
    """Gradient w.r.t. the conv input: full correlation with flipped kernels."""
    kh, kw = w.shape[2:]
    w_t = np.ascontiguousarray(w.transpose(1, 0, 2, 3)[:, :, ::-1, ::-1])
    zero_bias = np.zeros(w_t.shape[0], dtype=dy.dtype)
    return conv2d_forward(dy, w_t, zero_bias, kh - 1 - pad)


def conv2d_backward_params(dy: np.ndarray, x: np.ndarray, pad: int, kh: int, kw: int):
    """Gradients w.r.t. conv weights and bias."""
    win = sliding_window_view(_padded(x, pad), (kh, kw), axis=(2, 3))
    dw = np.einsum("bfhw,bchwij->fcij", dy, win, optimize=True)
    db = dy.sum(axis=(0, 2, 3))
    return dw, db


def maxpool2x2_forward(x: np.ndarray):
    """2x2/stride-2 max pool. Returns pooled values and winner index in [0,4)."""
    b, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ValueError(f"maxpool2x2 needs even spatial dims, got {h}x{w}")
    quads = (
        x.reshape(b, c, h // 2, 2, w // 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(b, c, h // 2, w // 2, 4)
    )
    idx = quads.argmax(axis=-1).astype(np.uint8)
    y = np.take_along_axis(quads, idx[..., None].astype(np.intp), axis=-1)[..., 0]
    return np.ascontiguousarray(y), idx


def maxpool2x2_backward(dy: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Scatter dy back to the winning positions of the forward pool."""
    b, c, oh, ow = dy.shape
    flat = np.zeros((b, c, oh, ow, 4), dtype=dy.dtype)
    np.put_along_axis(flat, idx[..., None].astype(np.intp), dy[..., None], axis=-1)
    return np.ascontiguousarray(
        flat.reshape(b, c, oh, ow, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(b, c, oh * 2, ow * 2)
    )
