"""Model container, forward trace and input-gradient computation.

A model is an ordered list of layers over a fixed input shape. Residual
connections are expressed with SkipAdd marker pairs: the forward walk pushes
the activation at each `begin` marker and adds it back at the matching `end`.
Every layer carries a 1-based `layer_index`; randomisation stages and stage
labels refer to parameterised layers by that index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NonFiniteError, ShapeMismatchError
from .layers import GUIDED, STANDARD, Conv2D, Dense, Flatten, Layer, MaxPool2D, ReLU, SkipAdd, Softmax, softmax

_NAME_STEMS = {
    "Dense": "dense",
    "Conv2D": "conv",
    "ReLU": "relu",
    "MaxPool2D": "pool",
    "Flatten": "flatten",
    "SkipAdd": "skip",
    "Softmax": "softmax",
}


@dataclass
class ForwardTrace:
    """Per-layer activations plus the final logits and probabilities."""

    activations: list
    logits: np.ndarray
    probabilities: np.ndarray


class Model:
    """Sequential network with optional residual marker pairs."""

    def __init__(self, layers: list[Layer], input_shape: tuple, num_classes: int,
                 metadata: dict | None = None):
        self.layers = layers
        self.input_shape = tuple(input_shape)
        self.num_classes = int(num_classes)
        self.metadata = dict(metadata or {})
        self._assign_names_and_indices()
        self._validate_wiring()

    def _assign_names_and_indices(self):
        counts: dict[str, int] = {}
        skip_open = 0
        for i, layer in enumerate(self.layers):
            layer.layer_index = i + 1
            if layer.kind == "SkipAdd":
                if layer.marker == "begin":
                    skip_open += 1
                    layer.name = f"skip{skip_open}_begin"
                else:
                    layer.name = f"skip{skip_open}_end"
                continue
            stem = _NAME_STEMS[layer.kind]
            counts[stem] = counts.get(stem, 0) + 1
            layer.name = f"{stem}{counts[stem]}"

    def _validate_wiring(self):
        """Check shape flow, skip pairing and the final class count."""
        shape = self.input_shape
        skip_stack = []
        for layer in self.layers:
            if layer.kind == "SkipAdd":
                if layer.marker == "begin":
                    skip_stack.append(shape)
                else:
                    if not skip_stack:
                        raise ValueError("SkipAdd end marker without a matching begin")
                    begin_shape = skip_stack.pop()
                    if begin_shape != shape:
                        raise ValueError(
                            f"skip branch changed shape {begin_shape} -> {shape}; cannot add")
                continue
            shape = layer.out_shape(shape)
        if skip_stack:
            raise ValueError("SkipAdd begin marker without a matching end")
        if shape != (self.num_classes,):
            raise ValueError(f"network produces {shape}, expected ({self.num_classes},)")

    @property
    def param_layers(self) -> list[Layer]:
        return [l for l in self.layers if l.has_params]

    def layer_by_index(self, index: int) -> Layer:
        return self.layers[index - 1]

    def copy(self) -> "Model":
        clone = Model.__new__(Model)
        clone.layers = [l.copy() for l in self.layers]
        clone.input_shape = self.input_shape
        clone.num_classes = self.num_classes
        clone.metadata = dict(self.metadata)
        return clone

    def astype(self, dtype) -> "Model":
        """Copy with parameters cast; used by float64 oracle checks."""
        clone = self.copy()
        for layer in clone.layers:
            if layer.has_params:
                layer.w = layer.w.astype(dtype)
                layer.b = layer.b.astype(dtype)
        return clone

    @property
    def dtype(self):
        for layer in self.layers:
            if layer.has_params:
                return layer.w.dtype
        return np.dtype(np.float32)


def _forward_batch(model: Model, xb: np.ndarray):
    """Run a batch through every layer.

    Returns (activations, caches, logits). `activations[i]` is the output of
    layer i; SkipAdd end outputs include the added branch. Softmax, when
    present, must be the final layer; logits are taken just before it.
    """
    acts = []
    caches = []
    skip_stack = []
    x = xb
    for layer in model.layers:
        if layer.kind == "SkipAdd":
            if layer.marker == "begin":
                skip_stack.append(x)
                caches.append(None)
            else:
                saved = skip_stack.pop()
                x = x + saved
                caches.append(None)
            acts.append(x)
            continue
        x, cache = layer.forward(x)
        acts.append(x)
        caches.append(cache)
    if model.layers and model.layers[-1].kind == "Softmax":
        logits = acts[-2]
    else:
        logits = acts[-1]
    return acts, caches, logits


def _backward_batch(model: Model, dlogits: np.ndarray, caches: list, rule: str = STANDARD,
                    param_grads: dict | None = None) -> np.ndarray:
    """Propagate a signal at the logits back to the input.

    Starts below the trailing Softmax if there is one. When `param_grads` is a
    dict it is filled with {layer_index: (dw, db)} along the way. Skip
    gradients accumulate: the end marker forwards the signal unchanged into
    the branch and banks a copy for the matching begin marker.
    """
    layers = model.layers
    upto = len(layers)
    if layers and layers[-1].kind == "Softmax":
        upto -= 1
    dy = dlogits
    pending_skip = []
    for i in range(upto - 1, -1, -1):
        layer = layers[i]
        if layer.kind == "SkipAdd":
            if layer.marker == "end":
                pending_skip.append(dy)
            else:
                dy = dy + pending_skip.pop()
            continue
        if param_grads is not None and layer.has_params:
            param_grads[layer.layer_index] = layer.param_grads(dy, caches[i])
        dy = layer.backward(dy, caches[i], rule=rule)
    return dy


def _check_input(model: Model, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    if x.shape != model.input_shape:
        raise ShapeMismatchError(
            f"input shape {x.shape} does not match model input {model.input_shape}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteError("input contains non-finite values")
    return x.astype(model.dtype, copy=False)


def forward(model: Model, x: np.ndarray) -> ForwardTrace:
    """Trace one sample through the network.

    Raises NonFiniteError if any activation goes non-finite and checks the
    returned probabilities sum to one within 1e-5.
    """
    x = _check_input(model, x)
    acts, _, logits = _forward_batch(model, x[None])
    acts = [a[0] for a in acts]
    logits = logits[0]
    for layer, a in zip(model.layers, acts):
        if not np.all(np.isfinite(a)):
            raise NonFiniteError(f"non-finite activation at layer {layer.layer_index} ({layer.name})")
    if model.layers and model.layers[-1].kind == "Softmax":
        probs = acts[-1]
    else:
        probs = softmax(logits)
    total = float(probs.sum())
    if abs(total - 1.0) > 1e-5:
        raise NonFiniteError(f"probabilities sum to {total}, expected 1 within 1e-5")
    return ForwardTrace(activations=acts, logits=logits, probabilities=probs)


def input_gradient(model: Model, x: np.ndarray, class_index: int, rule: str = STANDARD) -> np.ndarray:
    """Gradient of the chosen class logit with respect to the input."""
    if rule not in (STANDARD, GUIDED):
        raise ValueError(f"unknown backward rule {rule!r}")
    x = _check_input(model, x)
    if not 0 <= class_index < model.num_classes:
        raise ValueError(f"class index {class_index} outside [0, {model.num_classes})")
    grad = input_gradient_batch(model, x[None], np.array([class_index]), rule=rule)
    return grad[0]


def input_gradient_batch(model: Model, xb: np.ndarray, class_indices: np.ndarray,
                         rule: str = STANDARD) -> np.ndarray:
    """Batched logit gradients; one class index per row."""
    xb = np.ascontiguousarray(xb, dtype=model.dtype)
    _, caches, logits = _forward_batch(model, xb)
    dlogits = np.zeros_like(logits)
    dlogits[np.arange(len(xb)), class_indices] = 1.0
    dx = _backward_batch(model, dlogits, caches, rule=rule)
    if not np.all(np.isfinite(dx)):
        raise NonFiniteError("non-finite input gradient")
    return dx


def activation_gradient_batch(model: Model, xb: np.ndarray, class_indices: np.ndarray,
                              layer_pos: int):
    """Activation of layer at list position `layer_pos` and the gradient of the
    chosen class logits with respect to it (paths through that activation only).
    """
    xb = np.ascontiguousarray(xb, dtype=model.dtype)
    acts, caches, logits = _forward_batch(model, xb)
    dlogits = np.zeros_like(logits)
    dlogits[np.arange(len(xb)), class_indices] = 1.0
    layers = model.layers
    upto = len(layers)
    if layers and layers[-1].kind == "Softmax":
        upto -= 1
    dy = dlogits
    pending = []
    for i in range(upto - 1, layer_pos, -1):
        layer = layers[i]
        if layer.kind == "SkipAdd":
            if layer.marker == "end":
                pending.append(dy)
            else:
                dy = dy + pending.pop()
            continue
        dy = layer.backward(dy, caches[i])
    return acts[layer_pos], dy


def logits_batch(model: Model, xb: np.ndarray) -> np.ndarray:
    xb = np.ascontiguousarray(xb, dtype=model.dtype)
    _, _, logits = _forward_batch(model, xb)
    return logits


def predict_batch(model: Model, xb: np.ndarray, batch_size: int = 256) -> np.ndarray:
    """Argmax class per sample, evaluated in chunks."""
    out = np.empty(len(xb), dtype=np.int64)
    for start in range(0, len(xb), batch_size):
        chunk = xb[start:start + batch_size]
        out[start:start + len(chunk)] = np.argmax(logits_batch(model, chunk), axis=1)
    return out


def accuracy(model: Model, inputs: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of samples whose argmax logit matches the label."""
    pred = predict_batch(model, inputs)
    return float(np.mean(pred == np.asarray(labels)))
