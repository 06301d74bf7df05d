"""The two bench architectures.

Both are sized for 8x8 single-channel inputs and ten classes: a small
Conv-ReLU-Pool x2 / Dense x2 stack, and a variant with one residual block.
The residual net exists because skip connections keep a baseline explanation
path alive under randomisation, which layer-order experiments need to see.
"""

from __future__ import annotations

import numpy as np

from ..seeding import derive_rng
from .layers import Conv2D, Dense, Flatten, MaxPool2D, ReLU, SkipAdd, Softmax
from .model import Model

ARCH_NAMES = ("lenet", "mini_resnet")

DEFAULT_INPUT_SHAPE = (1, 8, 8)
DEFAULT_NUM_CLASSES = 10


def build_model(arch: str, seed: int, input_shape: tuple = DEFAULT_INPUT_SHAPE,
                num_classes: int = DEFAULT_NUM_CLASSES) -> Model:
    """Construct a freshly initialised model of the named architecture."""
    if arch == "lenet":
        return build_lenet(seed, input_shape, num_classes)
    if arch == "mini_resnet":
        return build_mini_resnet(seed, input_shape, num_classes)
    raise ValueError(f"unknown architecture {arch!r}; expected one of {ARCH_NAMES}")


def build_lenet(seed: int, input_shape: tuple = DEFAULT_INPUT_SHAPE,
                num_classes: int = DEFAULT_NUM_CLASSES) -> Model:
    rng = derive_rng(seed, "init", "lenet")
    c, h, w = input_shape
    flat = 16 * (h // 4) * (w // 4)
    layers = [
        Conv2D(c, 8, 3, pad=1, rng=rng),
        ReLU(),
        MaxPool2D(),
        Conv2D(8, 16, 3, pad=1, rng=rng),
        ReLU(),
        MaxPool2D(),
        Flatten(),
        Dense(flat, 32, rng=rng),
        ReLU(),
        Dense(32, num_classes, rng=rng),
        Softmax(),
    ]
    meta = {"arch": "lenet", "init": "kaiming_uniform_fan_in", "init_seed": seed}
    return Model(layers, input_shape, num_classes, metadata=meta)


def build_mini_resnet(seed: int, input_shape: tuple = DEFAULT_INPUT_SHAPE,
                      num_classes: int = DEFAULT_NUM_CLASSES) -> Model:
    rng = derive_rng(seed, "init", "mini_resnet")
    c, h, w = input_shape
    flat = 8 * (h // 2) * (w // 2)
    layers = [
        Conv2D(c, 8, 3, pad=1, rng=rng),
        ReLU(),
        SkipAdd("begin"),
        Conv2D(8, 8, 3, pad=1, rng=rng),
        ReLU(),
        Conv2D(8, 8, 3, pad=1, rng=rng),
        SkipAdd("end"),
        ReLU(),
        MaxPool2D(),
        Flatten(),
        Dense(flat, num_classes, rng=rng),
        Softmax(),
    ]
    meta = {"arch": "mini_resnet", "init": "kaiming_uniform_fan_in", "init_seed": seed}
    return Model(layers, input_shape, num_classes, metadata=meta)
