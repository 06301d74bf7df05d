"""Model persistence: a JSON manifest next to a raw float32 weight blob.

`save_model(model, "runs/net")` writes `runs/net.manifest` (layer kinds,
shapes, metadata; diffable text) and `runs/net.weights` (magic header plus
every parameter array in layer order, little-endian float32). Round-trips
are bit-exact. Loading validates the format version, layer kinds and the
exact blob length, so a truncated or foreign file never yields a partial
model.
"""

from __future__ import annotations

import json
import os

import numpy as np

from ..errors import ModelFileError
from .layers import Conv2D, Dense, Flatten, MaxPool2D, ReLU, SkipAdd, Softmax
from .model import Model

FORMAT_NAME = "mprtbench-model"
FORMAT_VERSION = 1
WEIGHTS_MAGIC = b"MBW1"


def _strip(path: str) -> str:
    for ext in (".manifest", ".weights"):
        if path.endswith(ext):
            return path[: -len(ext)]
    return path


def _layer_record(layer) -> dict:
    rec: dict = {"kind": layer.kind}
    if layer.kind == "Dense":
        rec["in_features"] = layer.in_features
        rec["out_features"] = layer.out_features
    elif layer.kind == "Conv2D":
        rec["in_channels"] = layer.in_channels
        rec["out_channels"] = layer.out_channels
        rec["kernel_size"] = layer.kernel_size
        rec["pad"] = layer.pad
    elif layer.kind == "SkipAdd":
        rec["marker"] = layer.marker
    return rec


def _layer_from_record(rec: dict):
    kind = rec.get("kind")
    if kind == "Dense":
        return Dense(int(rec["in_features"]), int(rec["out_features"]))
    if kind == "Conv2D":
        return Conv2D(int(rec["in_channels"]), int(rec["out_channels"]),
                      int(rec["kernel_size"]), pad=int(rec["pad"]))
    if kind == "ReLU":
        return ReLU()
    if kind == "MaxPool2D":
        return MaxPool2D()
    if kind == "Flatten":
        return Flatten()
    if kind == "SkipAdd":
        return SkipAdd(rec["marker"])
    if kind == "Softmax":
        return Softmax()
    raise ModelFileError(f"unknown layer kind {kind!r} in manifest")


def save_model(model: Model, path: str) -> None:
    base = _strip(path)
    parent = os.path.dirname(base)
    if parent:
        os.makedirs(parent, exist_ok=True)
    manifest = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "input_shape": list(model.input_shape),
        "num_classes": model.num_classes,
        "layers": [_layer_record(l) for l in model.layers],
        "metadata": model.metadata,
    }
    with open(base + ".manifest", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    parts = [WEIGHTS_MAGIC]
    for layer in model.param_layers:
        parts.append(np.ascontiguousarray(layer.w, dtype="<f4").tobytes())
        parts.append(np.ascontiguousarray(layer.b, dtype="<f4").tobytes())
    with open(base + ".weights", "wb") as fh:
        fh.write(b"".join(parts))


def load_model(path: str) -> Model:
    base = _strip(path)
    try:
        with open(base + ".manifest", "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except FileNotFoundError:
        raise ModelFileError(f"manifest not found: {base}.manifest")
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"malformed manifest {base}.manifest: {exc}")
    if manifest.get("format") != FORMAT_NAME:
        raise ModelFileError(f"not a {FORMAT_NAME} manifest: {base}.manifest")
    version = manifest.get("version")
    if version != FORMAT_VERSION:
        raise ModelFileError(f"unsupported model format version {version!r} (expected {FORMAT_VERSION})")

    layers = [_layer_from_record(rec) for rec in manifest["layers"]]
    model = Model(layers, tuple(manifest["input_shape"]), manifest["num_classes"],
                  metadata=manifest.get("metadata", {}))

    expected = len(WEIGHTS_MAGIC) + 4 * sum(l.w.size + l.b.size for l in model.param_layers)
    try:
        with open(base + ".weights", "rb") as fh:
            blob = fh.read()
    except FileNotFoundError:
        raise ModelFileError(f"weight blob not found: {base}.weights")
    if len(blob) != expected:
        raise ModelFileError(
            f"weight blob {base}.weights is {len(blob)} bytes, expected {expected} (truncated or foreign)")
    if blob[: len(WEIGHTS_MAGIC)] != WEIGHTS_MAGIC:
        raise ModelFileError(f"weight blob {base}.weights lacks the {WEIGHTS_MAGIC!r} header")

    offset = len(WEIGHTS_MAGIC)
    for layer in model.param_layers:
        for attr in ("w", "b"):
            arr = getattr(layer, attr)
            nbytes = 4 * arr.size
            flat = np.frombuffer(blob, dtype="<f4", count=arr.size, offset=offset)
            setattr(layer, attr, flat.reshape(arr.shape).astype(np.float32, copy=True))
            offset += nbytes
    return model
