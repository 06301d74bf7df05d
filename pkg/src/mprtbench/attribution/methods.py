"""The explanation methods and their dispatcher.

All methods run batched over samples; `explain` is the single-sample view of
`explain_batch`. Stochastic methods draw from rngs derived per (seed, draw
site), so the first sample of any batch sees the same noise regardless of
batch size, and no hidden global RNG state exists anywhere.

Sign handling is part of the method contract: Saliency and SmoothGrad return
magnitudes, GradCAM returns the positive part, everything else keeps the sign.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..engine.layers import GUIDED
from ..engine.model import Model, _check_input, activation_gradient_batch, input_gradient_batch
from ..errors import ConfigError
from ..seeding import derive_rng
from .lrp import RULE_EPSILON, RULE_ZPLUS, lrp_relevance_batch
from .preprocess import Attribution

METHOD_IDS = (
    "Gradient", "Saliency", "InputXGradient", "IntegratedGradients", "SmoothGrad",
    "GuidedBackprop", "GradCAM", "GradientSHAP", "LRP_Epsilon", "LRP_ZPlus",
    "RandomBaseline",
)

# Which hyperparameters each method accepts, and their defaults.
_RELEVANT = {
    "IntegratedGradients": {"steps": 20},
    "SmoothGrad": {"samples": 20, "noise_level": 0.1},
    "GradientSHAP": {"samples": 5, "noise_level": 0.1},
    "LRP_Epsilon": {"epsilon": 1e-6},
    "LRP_ZPlus": {"epsilon": 1e-6},
}


@dataclass
class MethodConfig:
    """Method id plus hyperparameters; unspecified fields take method defaults."""

    method: str
    steps: int | None = None
    samples: int | None = None
    noise_level: float | None = None
    epsilon: float | None = None

    def resolved(self) -> "MethodConfig":
        """Validate against the method's accepted hyperparameters and fill defaults."""
        if self.method not in METHOD_IDS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {METHOD_IDS}")
        relevant = _RELEVANT.get(self.method, {})
        out = replace(self)
        for field in ("steps", "samples", "noise_level", "epsilon"):
            value = getattr(self, field)
            if field in relevant:
                if value is None:
                    setattr(out, field, relevant[field])
            elif value is not None:
                raise ConfigError(f"{self.method} takes no {field!r} hyperparameter")
        if out.steps is not None and out.steps < 1:
            raise ConfigError("steps must be >= 1")
        if out.samples is not None and out.samples < 1:
            raise ConfigError("samples must be >= 1")
        if out.noise_level is not None and out.noise_level < 0:
            raise ConfigError("noise_level must be >= 0")
        if out.epsilon is not None and out.epsilon <= 0:
            raise ConfigError("epsilon must be > 0")
        return out


def _sample_ranges(xs: np.ndarray) -> np.ndarray:
    """Per-sample value range (max - min), shape [B, 1, 1, ...] for broadcasting."""
    flat = xs.reshape(len(xs), -1)
    rng = flat.max(axis=1) - flat.min(axis=1)
    return rng.reshape((len(xs),) + (1,) * (xs.ndim - 1)).astype(xs.dtype)


def _grads_over_copies(model: Model, points: np.ndarray, class_indices: np.ndarray) -> np.ndarray:
    """Gradients for a [B, n, ...] stack of input copies, one class per row."""
    b, n = points.shape[:2]
    flat = points.reshape((b * n,) + points.shape[2:])
    classes = np.repeat(class_indices, n)
    grads = input_gradient_batch(model, flat, classes)
    return grads.reshape(points.shape)


def _integrated_gradients(model, xs, classes, steps: int) -> np.ndarray:
    # Riemann midpoint on the straight path from a zero baseline
    alphas = ((np.arange(steps) + 0.5) / steps).astype(xs.dtype)
    points = xs[:, None] * alphas.reshape((1, steps) + (1,) * (xs.ndim - 1))
    grads = _grads_over_copies(model, points, classes)
    return xs * grads.mean(axis=1)


def _smoothgrad(model, xs, classes, samples: int, noise_level: float, seed: int) -> np.ndarray:
    rng = derive_rng(seed, "smoothgrad")
    sigma = noise_level * _sample_ranges(xs)
    noise = rng.standard_normal((len(xs), samples) + xs.shape[1:], dtype=np.float32)
    points = xs[:, None] + noise * sigma[:, None]
    grads = _grads_over_copies(model, points, classes)
    return np.abs(grads).mean(axis=1)


def _gradient_shap(model, xs, classes, samples: int, noise_level: float, seed: int) -> np.ndarray:
    rng_base = derive_rng(seed, "shap", "baseline")
    rng_alpha = derive_rng(seed, "shap", "alpha")
    sigma = noise_level * _sample_ranges(xs)
    baselines = rng_base.standard_normal((len(xs), samples) + xs.shape[1:],
                                         dtype=np.float32) * sigma[:, None]
    alphas = rng_alpha.random((len(xs), samples), dtype=np.float32)
    alphas = alphas.reshape(alphas.shape + (1,) * (xs.ndim - 1))
    points = baselines + alphas * (xs[:, None] - baselines)
    grads = _grads_over_copies(model, points, classes)
    return ((xs[:, None] - baselines) * grads).mean(axis=1)


def _gradcam(model, xs, classes) -> np.ndarray:
    conv_pos = None
    for pos, layer in enumerate(model.layers):
        if layer.kind == "Conv2D":
            conv_pos = pos
    if conv_pos is None:
        raise ConfigError("GradCAM needs a model with at least one Conv2D layer")
    acts, grads = activation_gradient_batch(model, xs, classes, conv_pos)
    weights = grads.mean(axis=(2, 3))
    cam = np.maximum(np.einsum("bf,bfhw->bhw", weights, acts), 0)
    _, _, hh, ww = xs.shape
    h, w = cam.shape[1:]
    iy = np.minimum((np.floor((np.arange(hh) + 0.5) * h / hh)).astype(int), h - 1)
    ix = np.minimum((np.floor((np.arange(ww) + 0.5) * w / ww)).astype(int), w - 1)
    up = cam[:, iy][:, :, ix]
    return np.broadcast_to(up[:, None], xs.shape).astype(np.float32).copy()


def explain_batch(model: Model, xs: np.ndarray, class_indices: np.ndarray,
                  cfg: MethodConfig, rng_seed: int) -> np.ndarray:
    """Attribution values for a batch of samples, one target class per row."""
    cfg = cfg.resolved()
    xs = np.ascontiguousarray(xs, dtype=np.float32)
    classes = np.asarray(class_indices, dtype=np.int64)
    if classes.min() < 0 or classes.max() >= model.num_classes:
        raise ValueError(f"class indices must lie in [0, {model.num_classes})")
    method = cfg.method
    if method == "Gradient":
        return input_gradient_batch(model, xs, classes)
    if method == "Saliency":
        return np.abs(input_gradient_batch(model, xs, classes))
    if method == "InputXGradient":
        return xs * input_gradient_batch(model, xs, classes)
    if method == "IntegratedGradients":
        return _integrated_gradients(model, xs, classes, cfg.steps)
    if method == "SmoothGrad":
        return _smoothgrad(model, xs, classes, cfg.samples, cfg.noise_level, rng_seed)
    if method == "GuidedBackprop":
        return input_gradient_batch(model, xs, classes, rule=GUIDED)
    if method == "GradCAM":
        return _gradcam(model, xs, classes)
    if method == "GradientSHAP":
        return _gradient_shap(model, xs, classes, cfg.samples, cfg.noise_level, rng_seed)
    if method == "LRP_Epsilon":
        return lrp_relevance_batch(model, xs, classes, RULE_EPSILON, cfg.epsilon)[0]
    if method == "LRP_ZPlus":
        return lrp_relevance_batch(model, xs, classes, RULE_ZPLUS, cfg.epsilon)[0]
    # RandomBaseline: model-independent uniform noise
    rng = derive_rng(rng_seed, "random_baseline")
    return rng.random((len(xs),) + xs.shape[1:], dtype=np.float32)


def explain(model: Model, x: np.ndarray, class_index: int, cfg: MethodConfig,
            rng_seed: int) -> Attribution:
    """Explain one sample; deterministic given rng_seed."""
    x = _check_input(model, np.asarray(x, dtype=np.float32))
    values = explain_batch(model, x[None], np.array([class_index]), cfg, rng_seed)[0]
    method = cfg.method
    return Attribution(
        values=values,
        method=method,
        class_index=int(class_index),
        abs_applied=method in ("Saliency", "SmoothGrad"),
        positive_only=method == "GradCAM",
    )
