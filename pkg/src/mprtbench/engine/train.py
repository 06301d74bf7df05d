"""Minibatch SGD trainer with momentum and cross-entropy loss.

Deterministic given (config, dataset, seed): initialisation, shuffling and
update order all derive from the seed, so repeated runs produce bit-identical
parameters. A non-finite loss aborts immediately rather than returning a
poisoned model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DivergenceError
from ..seeding import derive_rng
from .architectures import build_model
from .model import Model, _backward_batch, _forward_batch, accuracy


@dataclass
class TrainConfig:
    arch: str = "lenet"
    epochs: int = 20
    learning_rate: float = 0.05
    momentum: float = 0.9
    batch_size: int = 32


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> float:
    """Mean negative log-likelihood via shifted log-sum-exp."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1))
    return float(np.mean(lse - shifted[np.arange(len(labels)), labels]))


def train(config: TrainConfig, dataset, seed: int) -> Model:
    """Train a fresh model of config.arch on the dataset's train split.

    Returns the model with train/test accuracy and the full training recipe
    recorded in metadata. epochs=0 returns the untouched initialisation.
    """
    xs = np.ascontiguousarray(dataset.train_inputs, dtype=np.float32)
    ys = np.asarray(dataset.train_labels, dtype=np.int64)
    if len(xs) == 0:
        raise ValueError("training split is empty")
    input_shape = xs.shape[1:]
    num_classes = int(dataset.num_classes)
    if ys.min() < 0 or ys.max() >= num_classes:
        raise ValueError(f"labels must lie in [0, {num_classes})")

    model = build_model(config.arch, seed, input_shape=input_shape, num_classes=num_classes)
    rng = derive_rng(seed, "train", config.arch)
    velocity = {l.layer_index: (np.zeros_like(l.w), np.zeros_like(l.b))
                for l in model.param_layers}

    last_loss = float("nan")
    for epoch in range(config.epochs):
        order = rng.permutation(len(xs))
        for start in range(0, len(xs), config.batch_size):
            idx = order[start:start + config.batch_size]
            xb, yb = xs[idx], ys[idx]
            acts, caches, logits = _forward_batch(model, xb)
            last_loss = cross_entropy(logits, yb)
            if not np.isfinite(last_loss):
                raise DivergenceError(
                    f"loss went non-finite at epoch {epoch + 1}, batch {start // config.batch_size}: "
                    f"{last_loss}; lower the learning rate")
            shifted = logits - logits.max(axis=1, keepdims=True)
            probs = np.exp(shifted)
            probs /= probs.sum(axis=1, keepdims=True)
            dlogits = probs
            dlogits[np.arange(len(yb)), yb] -= 1.0
            dlogits /= len(yb)
            grads: dict = {}
            _backward_batch(model, dlogits, caches, param_grads=grads)
            for layer in model.param_layers:
                dw, db = grads[layer.layer_index]
                vw, vb = velocity[layer.layer_index]
                vw *= config.momentum
                vw -= config.learning_rate * dw
                vb *= config.momentum
                vb -= config.learning_rate * db
                layer.w += vw
                layer.b += vb

    model.metadata.update({
        "arch": config.arch,
        "epochs": config.epochs,
        "learning_rate": config.learning_rate,
        "momentum": config.momentum,
        "batch_size": config.batch_size,
        "train_seed": seed,
        "final_loss": last_loss,
        "train_accuracy": accuracy(model, xs, ys),
        "test_accuracy": accuracy(model, np.asarray(dataset.test_inputs, dtype=np.float32),
                                  np.asarray(dataset.test_labels)),
    })
    return model
