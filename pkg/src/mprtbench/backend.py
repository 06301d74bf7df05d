"""Kernel backend selection.

The compiled extension (`_convkernels`, built from Cython) and the numpy
fallback (`_convkernels_py`) expose the same functions. The compiled one only
handles float32; float64 calls always route to numpy, which is what the
finite-difference oracles use.

Selection order: the `MPRTBENCH_KERNELS` environment variable ("auto",
"compiled", "python"), then `set_backend()`. "auto" prefers the compiled
extension when importable.
"""

from __future__ import annotations

import os

import numpy as np

from . import _convkernels_py as _py

try:
    from . import _convkernels as _compiled
except ImportError:
    _compiled = None

_VALID_MODES = ("auto", "compiled", "python")
_mode = os.environ.get("MPRTBENCH_KERNELS", "auto")
if _mode not in _VALID_MODES:
    raise RuntimeError(f"MPRTBENCH_KERNELS must be one of {_VALID_MODES}, got {_mode!r}")
if _mode == "compiled" and _compiled is None:
    raise RuntimeError("MPRTBENCH_KERNELS=compiled but the extension is not built")


def set_backend(mode: str) -> None:
    """Force the kernel backend; mainly for tests and benchmarks."""
    global _mode
    if mode not in _VALID_MODES:
        raise ValueError(f"mode must be one of {_VALID_MODES}, got {mode!r}")
    if mode == "compiled" and _compiled is None:
        raise RuntimeError("compiled kernel extension is not built")
    _mode = mode


def active_backend() -> str:
    """Name of the backend float32 calls currently resolve to."""
    if _mode == "python" or (_mode == "auto" and _compiled is None):
        return "numpy"
    return "compiled"


def compiled_available() -> bool:
    return _compiled is not None


def _impl(x: np.ndarray):
    if x.dtype == np.float32 and active_backend() == "compiled":
        return _compiled
    return _py


def _f32c(a: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(a)


def conv2d_forward(x, w, b, pad):
    return _impl(x).conv2d_forward(_f32c(x), _f32c(w), _f32c(b), pad)


def conv2d_backward_input(dy, w, pad):
    return _impl(dy).conv2d_backward_input(_f32c(dy), _f32c(w), pad)


def conv2d_backward_params(dy, x, pad, kh, kw):
    return _impl(dy).conv2d_backward_params(_f32c(dy), _f32c(x), pad, kh, kw)


def maxpool2x2_forward(x):
    return _impl(x).maxpool2x2_forward(_f32c(x))


def maxpool2x2_backward(dy, idx):
    return _impl(dy).maxpool2x2_backward(_f32c(dy), _f32c(idx))
