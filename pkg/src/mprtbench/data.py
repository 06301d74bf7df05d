"""Datasets: a seeded synthetic glyph generator plus an IDX reader.

The synthetic task places one of C binary stroke glyphs on a blank image at a
jittered position, flips its polarity with probability 1/2 and adds Gaussian
pixel noise. The polarity flip keeps every class-conditional mean near zero,
so no linear map on raw pixels separates the classes, while a small CNN
learns both polarities easily. Labels are assigned round-robin, which keeps
each split balanced to within one sample per class.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass

import numpy as np

from .seeding import derive_rng

# 6x6 stroke masks, one per class. Every glyph has exactly 12 on-pixels, so
# total image energy carries no class signal, and every support touches all
# four sides of the box, so no two classes are translations of each other
# under the placement jitter. Classes are only separable by stroke structure.
_GLYPH_ROWS = [
    ["1....1", ".1..1.", "..11..", "..11..", ".1..1.", "1....1"],  # X
    ["11....", ".11...", "..11..", "...11.", "....11", "....11"],  # diagonal
    ["....11", "...11.", "..11..", ".11...", "11....", "11...."],  # anti-diagonal
    ["11....", "1.....", "1.....", "1.....", "1.....", "111111"],  # L
    ["111111", ".....1", ".....1", ".....1", ".....1", "....11"],  # mirrored L
    ["1....1", "1....1", "1....1", "1....1", "1....1", "1....1"],  # vertical rails
    ["111111", "......", "......", "......", "......", "111111"],  # horizontal rails
    ["111111", "..1...", "..1...", "..1...", "..1...", "..11.."],  # T
    ["..11..", ".1..1.", "1....1", "1....1", ".1..1.", "..11.."],  # diamond
    ["1..1..", "..1..1", "1..1..", "..1..1", "1..1..", "..1..1"],  # checker
]

GLYPHS = np.array([[[c == "1" for c in row] for row in g] for g in _GLYPH_ROWS],
                  dtype=np.float32)
GLYPH_SIZE = GLYPHS.shape[-1]
MAX_CLASSES = len(GLYPHS)


@dataclass
class Dataset:
    """Image tensors with class labels and a train/test split tag per sample."""

    inputs: np.ndarray   # [N, C, H, W] float32
    labels: np.ndarray   # [N] int64
    split: np.ndarray    # [N] of {"train", "test"}
    num_classes: int
    meta: dict

    def __post_init__(self):
        if len(self.inputs) != len(self.labels) or len(self.labels) != len(self.split):
            raise ValueError("inputs, labels and split must have equal length")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError(f"labels must lie in [0, {self.num_classes})")

    def _mask(self, tag: str) -> np.ndarray:
        return self.split == tag

    @property
    def train_inputs(self) -> np.ndarray:
        return self.inputs[self._mask("train")]

    @property
    def train_labels(self) -> np.ndarray:
        return self.labels[self._mask("train")]

    @property
    def test_inputs(self) -> np.ndarray:
        return self.inputs[self._mask("test")]

    @property
    def test_labels(self) -> np.ndarray:
        return self.labels[self._mask("test")]


def _make_split(n: int, num_classes: int, image_size: int, noise: float,
                rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    jitter = image_size - GLYPH_SIZE
    labels = np.arange(n, dtype=np.int64) % num_classes
    images = rng.normal(0.0, noise, size=(n, 1, image_size, image_size)).astype(np.float32)
    offsets = rng.integers(0, jitter + 1, size=(n, 2))
    signs = rng.choice(np.array([-1.0, 1.0], dtype=np.float32), size=n)
    for i in range(n):
        dy, dx = offsets[i]
        images[i, 0, dy:dy + GLYPH_SIZE, dx:dx + GLYPH_SIZE] += signs[i] * GLYPHS[labels[i]]
    order = rng.permutation(n)
    return images[order], labels[order]


def generate_synthetic(n_train: int = 2000, n_test: int = 500, num_classes: int = 10,
                       image_size: int = 8, noise: float = 0.35, seed: int = 0) -> Dataset:
    """Build the glyph dataset; identical output for identical arguments."""
    if num_classes < 2:
        raise ValueError("need at least 2 classes")
    if num_classes > MAX_CLASSES:
        raise ValueError(f"at most {MAX_CLASSES} classes supported, got {num_classes}")
    if image_size < 8:
        raise ValueError("image size must be at least 8x8")
    if noise < 0:
        raise ValueError("noise must be non-negative")
    train_x, train_y = _make_split(n_train, num_classes, image_size, noise,
                                   derive_rng(seed, "data", "train"))
    test_x, test_y = _make_split(n_test, num_classes, image_size, noise,
                                 derive_rng(seed, "data", "test"))
    inputs = np.concatenate([train_x, test_x])
    labels = np.concatenate([train_y, test_y])
    split = np.array(["train"] * n_train + ["test"] * n_test)
    meta = {"kind": "synthetic", "n_train": n_train, "n_test": n_test,
            "num_classes": num_classes, "image_size": image_size,
            "noise": noise, "seed": seed}
    return Dataset(inputs, labels, split, num_classes, meta)


def subset(dataset: Dataset, n_train: int | None = None, n_test: int | None = None) -> Dataset:
    """First-k slice per split; None keeps a split whole. Order-preserving."""
    keep = np.zeros(len(dataset.inputs), dtype=bool)
    for tag, cap in (("train", n_train), ("test", n_test)):
        idx = np.flatnonzero(dataset.split == tag)
        if cap is not None:
            idx = idx[:cap]
        keep[idx] = True
    meta = dict(dataset.meta, subset={"n_train": n_train, "n_test": n_test})
    return Dataset(dataset.inputs[keep], dataset.labels[keep], dataset.split[keep],
                   dataset.num_classes, meta)


def read_idx(path: str) -> np.ndarray:
    """Read one big-endian IDX file (images magic 0x803, labels 0x801)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 4:
        raise ValueError(f"{path}: too short for an IDX header")
    magic = struct.unpack(">I", blob[:4])[0]
    if magic == 0x00000801:
        ndim = 1
    elif magic == 0x00000803:
        ndim = 3
    else:
        raise ValueError(f"{path}: unsupported IDX magic 0x{magic:08x}")
    header = 4 + 4 * ndim
    dims = struct.unpack(f">{ndim}I", blob[4:header])
    expected = header + int(np.prod(dims))
    if len(blob) != expected:
        raise ValueError(f"{path}: {len(blob)} bytes, expected {expected}")
    return np.frombuffer(blob, dtype=np.uint8, offset=header).reshape(dims).copy()


def load_idx_dataset(images_path: str, labels_path: str, n_train: int, n_test: int,
                     num_classes: int = 10) -> Dataset:
    """Assemble a Dataset from IDX image/label files, pixels scaled to [0, 1].

    Takes the first n_train samples as train and the next n_test as test,
    so the splits are disjoint by construction.
    """
    images = read_idx(images_path)
    labels_raw = read_idx(labels_path)
    if images.ndim != 3:
        raise ValueError(f"{images_path}: expected 3-D image data")
    if len(images) != len(labels_raw):
        raise ValueError("image and label counts differ")
    total = n_train + n_test
    if total > len(images):
        raise ValueError(f"requested {total} samples, file has {len(images)}")
    x = (images[:total].astype(np.float32) / 255.0)[:, None, :, :]
    y = labels_raw[:total].astype(np.int64)
    split = np.array(["train"] * n_train + ["test"] * n_test)
    meta = {"kind": "idx", "images_path": images_path, "labels_path": labels_path,
            "n_train": n_train, "n_test": n_test, "num_classes": num_classes}
    return Dataset(x, y, split, num_classes, meta)


def save_dataset(dataset: Dataset, out_dir: str) -> None:
    """Write the dataset as .npy arrays plus a JSON meta file (deterministic bytes)."""
    os.makedirs(out_dir, exist_ok=True)
    np.save(os.path.join(out_dir, "inputs.npy"), dataset.inputs)
    np.save(os.path.join(out_dir, "labels.npy"), dataset.labels)
    np.save(os.path.join(out_dir, "split.npy"), dataset.split)
    meta = dict(dataset.meta, num_classes=dataset.num_classes)
    with open(os.path.join(out_dir, "meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_dataset(in_dir: str) -> Dataset:
    with open(os.path.join(in_dir, "meta.json"), "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    inputs = np.load(os.path.join(in_dir, "inputs.npy"))
    labels = np.load(os.path.join(in_dir, "labels.npy"))
    split = np.load(os.path.join(in_dir, "split.npy"))
    return Dataset(inputs, labels, split, int(meta["num_classes"]), meta)
