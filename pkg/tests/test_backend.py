"""Compiled and numpy kernel backends must be interchangeable."""

import numpy as np
import pytest

from mprtbench import backend
from mprtbench.engine.architectures import build_model
from mprtbench.engine.model import input_gradient_batch, logits_batch

needs_compiled = pytest.mark.skipif(
    not backend.compiled_available(), reason="compiled kernels not built")


@pytest.fixture()
def restore_backend():
    before = "compiled" if backend.active_backend() == "compiled" else "python"
    yield
    try:
        backend.set_backend(before)
    except RuntimeError:
        backend.set_backend("python")


def _conv_args(rng, n=3, cin=2, cout=4, hw=6, k=3):
    x = rng.standard_normal((n, cin, hw, hw)).astype(np.float32)
    w = rng.standard_normal((cout, cin, k, k)).astype(np.float32)
    b = rng.standard_normal(cout).astype(np.float32)
    return x, w, b


@needs_compiled
@pytest.mark.parametrize("pad", [0, 1])
def test_conv_forward_parity(rng, pad, restore_backend):
    x, w, b = _conv_args(rng)
    backend.set_backend("compiled")
    fast = backend.conv2d_forward(x, w, b, pad)
    backend.set_backend("python")
    ref = backend.conv2d_forward(x, w, b, pad)
    assert fast.shape == ref.shape
    assert np.allclose(fast, ref, atol=1e-5)


@needs_compiled
@pytest.mark.parametrize("pad", [0, 1])
def test_conv_backward_parity(rng, pad, restore_backend):
    x, w, b = _conv_args(rng)
    backend.set_backend("python")
    y = backend.conv2d_forward(x, w, b, pad)
    dy = rng.standard_normal(y.shape).astype(np.float32)
    ref_dx = backend.conv2d_backward_input(dy, w, pad)
    ref_dw, ref_db = backend.conv2d_backward_params(dy, x, pad, w.shape[2], w.shape[3])
    backend.set_backend("compiled")
    fast_dx = backend.conv2d_backward_input(dy, w, pad)
    fast_dw, fast_db = backend.conv2d_backward_params(dy, x, pad, w.shape[2], w.shape[3])
    assert np.allclose(fast_dx, ref_dx, atol=1e-4)
    assert np.allclose(fast_dw, ref_dw, atol=1e-4)
    assert np.allclose(fast_db, ref_db, atol=1e-4)


@needs_compiled
def test_maxpool_parity(rng, restore_backend):
    x = rng.standard_normal((4, 3, 8, 8)).astype(np.float32)
    backend.set_backend("compiled")
    fast_y, fast_idx = backend.maxpool2x2_forward(x)
    backend.set_backend("python")
    ref_y, ref_idx = backend.maxpool2x2_forward(x)
    assert np.array_equal(fast_y, ref_y)
    assert np.array_equal(fast_idx, ref_idx)
    dy = rng.standard_normal(ref_y.shape).astype(np.float32)
    ref_dx = backend.maxpool2x2_backward(dy, ref_idx)
    backend.set_backend("compiled")
    fast_dx = backend.maxpool2x2_backward(dy, fast_idx)
    assert np.allclose(fast_dx, ref_dx, atol=1e-6)


@needs_compiled
def test_whole_model_parity(rng, restore_backend):
    model = build_model("mini_resnet", seed=2)
    xs = rng.standard_normal((6, 1, 8, 8)).astype(np.float32)
    classes = np.arange(6) % 10
    backend.set_backend("compiled")
    logits_fast = logits_batch(model, xs)
    grads_fast = input_gradient_batch(model, xs, classes)
    backend.set_backend("python")
    logits_ref = logits_batch(model, xs)
    grads_ref = input_gradient_batch(model, xs, classes)
    assert np.allclose(logits_fast, logits_ref, atol=1e-4)
    assert np.allclose(grads_fast, grads_ref, atol=1e-4)


def test_float64_routes_to_numpy(rng):
    # The compiled path is float32 only; float64 inputs must take the numpy
    # implementation regardless of the selected backend.
    x = rng.standard_normal((1, 1, 4, 4))
    w = rng.standard_normal((1, 1, 3, 3))
    b = rng.standard_normal(1)
    y = backend.conv2d_forward(x, w, b, 1)
    assert y.dtype == np.float64


def test_set_backend_rejects_unknown():
    with pytest.raises(ValueError):
        backend.set_backend("torch")
