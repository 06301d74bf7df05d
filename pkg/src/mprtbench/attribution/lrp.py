"""Layer-wise relevance propagation with the epsilon and z-plus rules.

Relevance starts at the target logit and flows top-down. Linear layers
redistribute by input contribution over the stabilised pre-activation
(epsilon rule) or by the positive contributions only (z-plus rule; the
positive part of w*x, so signed inputs are handled without assuming
post-ReLU positivity). Bias relevance is absorbed, not redistributed, so
conservation is exact only on bias-free nets. ReLU and pooling pass
relevance through their forward winners; residual add junctions split
proportionally to the two summands.
"""

from __future__ import annotations

import numpy as np

from .. import backend
from ..engine.model import Model, _forward_batch

RULE_EPSILON = "epsilon"
RULE_ZPLUS = "zplus"


def _sign_pos(z: np.ndarray) -> np.ndarray:
    # sign with sign(0) := +1 so the stabiliser never cancels to zero
    return np.where(z >= 0, np.float32(1.0), np.float32(-1.0))


def _skip_pairs(model: Model) -> dict:
    """Map the list position of each SkipAdd end marker to its begin marker."""
    pairs = {}
    stack = []
    for pos, layer in enumerate(model.layers):
        if layer.kind != "SkipAdd":
            continue
        if layer.marker == "begin":
            stack.append(pos)
        else:
            pairs[pos] = stack.pop()
    return pairs


def _dense_epsilon(layer, x, rel, eps):
    z = x @ layer.w.T + layer.b
    s = rel / (z + eps * _sign_pos(z))
    return x * (s @ layer.w)


def _dense_zplus(layer, x, rel, eps):
    xp = np.maximum(x, 0)
    xn = np.minimum(x, 0)
    wp = np.maximum(layer.w, 0)
    wn = np.minimum(layer.w, 0)
    z = xp @ wp.T + xn @ wn.T
    s = rel / (z + eps)
    return xp * (s @ wp) + xn * (s @ wn)


def _conv_epsilon(layer, x, rel, eps):
    z = backend.conv2d_forward(x, layer.w, layer.b, layer.pad)
    s = rel / (z + eps * _sign_pos(z))
    return x * backend.conv2d_backward_input(s, layer.w, layer.pad)


def _conv_zplus(layer, x, rel, eps):
    xp = np.maximum(x, 0)
    xn = np.minimum(x, 0)
    wp = np.maximum(layer.w, 0)
    wn = np.minimum(layer.w, 0)
    zero_b = np.zeros_like(layer.b)
    z = backend.conv2d_forward(xp, wp, zero_b, layer.pad) \
        + backend.conv2d_forward(xn, wn, zero_b, layer.pad)
    s = rel / (z + eps)
    return xp * backend.conv2d_backward_input(s, wp, layer.pad) \
        + xn * backend.conv2d_backward_input(s, wn, layer.pad)


def lrp_relevance_batch(model: Model, xb: np.ndarray, class_indices: np.ndarray,
                        rule: str = RULE_EPSILON, epsilon: float = 1e-6,
                        record: bool = False):
    """Propagate relevance for a batch; returns (input relevance, records).

    `records` maps layer_index -> relevance of that layer's output (plus key 0
    for the input itself); populated only when record=True.
    """
    if rule not in (RULE_EPSILON, RULE_ZPLUS):
        raise ValueError(f"unknown LRP rule {rule!r}")
    eps = np.float32(epsilon)
    xb = np.ascontiguousarray(xb, dtype=np.float32)
    acts, caches, logits = _forward_batch(model, xb)

    rel = np.zeros_like(logits)
    rows = np.arange(len(xb))
    rel[rows, class_indices] = logits[rows, class_indices]

    layers = model.layers
    upto = len(layers)
    if layers and layers[-1].kind == "Softmax":
        upto -= 1

    pairs = _skip_pairs(model)
    banked: dict = {}
    records: dict = {}
    for i in range(upto - 1, -1, -1):
        layer = layers[i]
        if record:
            records[layer.layer_index] = rel
        if layer.kind == "SkipAdd":
            if layer.marker == "end":
                branch = acts[i - 1]
                saved = acts[pairs[i]]
                if rule == RULE_ZPLUS:
                    bp = np.maximum(branch, 0)
                    sp = np.maximum(saved, 0)
                    share = rel / (bp + sp + eps)
                    rel = bp * share
                    banked[pairs[i]] = sp * share
                else:
                    z = branch + saved
                    share = rel / (z + eps * _sign_pos(z))
                    rel = branch * share
                    banked[pairs[i]] = saved * share
            else:
                rel = rel + banked.pop(i)
            continue
        if layer.kind == "Dense":
            x = caches[i]
            rel = _dense_epsilon(layer, x, rel, eps) if rule == RULE_EPSILON \
                else _dense_zplus(layer, x, rel, eps)
        elif layer.kind == "Conv2D":
            x = caches[i]
            rel = _conv_epsilon(layer, x, rel, eps) if rule == RULE_EPSILON \
                else _conv_zplus(layer, x, rel, eps)
        elif layer.kind == "ReLU":
            rel = np.where(caches[i] > 0, rel, np.float32(0.0))
        elif layer.kind == "MaxPool2D":
            rel = backend.maxpool2x2_backward(rel, caches[i])
        elif layer.kind == "Flatten":
            rel = rel.reshape(caches[i])
    if record:
        records[0] = rel
    return rel, records
