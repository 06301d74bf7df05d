"""Experiment configuration: one JSON document, strictly validated.

A config is the full description of an experiment run. Unknown keys are
rejected at every nesting level (a typo in a method name must fail loudly,
not silently skip a cell), every enum-valued field is checked against the
declared members, and the resolved document hashes to a short id that every
output file embeds. The hash covers the semantic fields only, so moving the
output directory or changing the thread count does not change result
identity.
"""

from __future__ import annotations

import hashlib
import json

from .attribution.methods import METHOD_IDS, MethodConfig
from .engine.architectures import ARCH_NAMES
from .errors import ConfigError
from .metrics.runners import METRIC_IDS
from .metrics.similarity import SIMILARITY_IDS
from .randomisation import ORDERS, REINIT_RULES

DEFAULT_CONFIG = {
    "seed": 0,
    "out": "results",
    "threads": 1,
    "dataset": {
        "kind": "synthetic",
        "n_train": 2000,
        "n_test": 500,
        "num_classes": 10,
        "image_size": 8,
        "noise": 0.35,
        "seed": 0,
        "images_path": None,
        "labels_path": None,
    },
    "model": {
        "arch": "lenet",
        "seed": 5,
        "epochs": 20,
        "learning_rate": 0.05,
        "momentum": 0.9,
        "batch_size": 32,
    },
    "methods": ["Gradient", "Saliency", "IntegratedGradients", "SmoothGrad",
                "GuidedBackprop", "GradCAM", "LRP_Epsilon", "LRP_ZPlus",
                "RandomBaseline"],
    "method_params": {},
    "metrics": ["MPRT", "sMPRT", "eMPRT"],
    "plan": {"order": "TopDown", "reinit": "ScaledNormal", "seed": 0},
    "rho": "SSIM",
    "xi_bins": 100,
    "smprt": {"n": 50, "noise_level": 0.2},
    "eval_samples": 100,
    "curves": True,
    "metaeval": {
        "enabled": True,
        "K": 5,
        "iterations": 3,
        "n_test": 32,
        "metrics": ["MPRT", "eMPRT"],
        "method_sets": {"default": ["Gradient", "GradCAM", "LRP_Epsilon",
                                    "GuidedBackprop"]},
        "specs": None,
    },
}

# Fields that affect where and how fast results are produced, but not what
# they contain; excluded from the config hash.
_NON_SEMANTIC_KEYS = ("out", "threads")


def _merge(defaults, user, path: str):
    """Deep-merge user values over defaults, rejecting keys not in defaults."""
    if not isinstance(user, dict):
        raise ConfigError(f"{path or 'config'} must be an object, got {type(user).__name__}")
    out = {}
    for key, default_value in defaults.items():
        here = f"{path}.{key}" if path else key
        # method_params and metaeval.method_sets are user-keyed mappings, not
        # schema objects: replace them wholesale instead of key-checking.
        if key not in user:
            out[key] = default_value
        elif isinstance(default_value, dict) and here not in ("method_params",
                                                              "metaeval.method_sets"):
            out[key] = _merge(default_value, user[key], here)
        else:
            out[key] = user[key]
    unknown = sorted(set(user) - set(defaults))
    if unknown:
        prefix = f"{path}." if path else ""
        raise ConfigError(f"unknown config key '{prefix}{unknown[0]}'"
                          f" (unknown keys: {unknown})")
    return out


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def _check_enum(value, allowed, label: str) -> None:
    _require(value in allowed, f"{label} must be one of {list(allowed)}, got {value!r}")


def _check_methods(methods, label: str) -> None:
    _require(isinstance(methods, list) and methods, f"{label} must be a non-empty list")
    for m in methods:
        _check_enum(m, METHOD_IDS, f"{label} entry")
    _require(len(set(methods)) == len(methods), f"{label} has duplicates")


def _validate(cfg: dict) -> None:
    ds = cfg["dataset"]
    _check_enum(ds["kind"], ("synthetic", "idx"), "dataset.kind")
    if ds["kind"] == "idx":
        _require(ds["images_path"] and ds["labels_path"],
                 "dataset.kind 'idx' needs images_path and labels_path")
    _require(ds["num_classes"] >= 2, "dataset.num_classes must be >= 2")
    _require(ds["image_size"] >= 8, "dataset.image_size must be >= 8")
    _require(ds["noise"] >= 0, "dataset.noise must be >= 0")
    _require(ds["n_train"] >= 1 and ds["n_test"] >= 1,
             "dataset split sizes must be >= 1")

    model = cfg["model"]
    _check_enum(model["arch"], ARCH_NAMES, "model.arch")
    _require(model["epochs"] >= 0, "model.epochs must be >= 0")
    _require(model["learning_rate"] > 0, "model.learning_rate must be > 0")
    _require(0 <= model["momentum"] < 1, "model.momentum must be in [0, 1)")
    _require(model["batch_size"] >= 1, "model.batch_size must be >= 1")

    _check_methods(cfg["methods"], "methods")
    for name, params in cfg["method_params"].items():
        _check_enum(name, METHOD_IDS, "method_params key")
        _require(isinstance(params, dict), f"method_params.{name} must be an object")
        MethodConfig(name, **params).resolved()

    _require(isinstance(cfg["metrics"], list) and cfg["metrics"],
             "metrics must be a non-empty list")
    for metric in cfg["metrics"]:
        _check_enum(metric, METRIC_IDS, "metrics entry")

    plan = cfg["plan"]
    _check_enum(plan["order"], ORDERS, "plan.order")
    _check_enum(plan["reinit"], REINIT_RULES, "plan.reinit")

    _check_enum(cfg["rho"], SIMILARITY_IDS, "rho")
    _require(cfg["xi_bins"] >= 2, "xi_bins must be >= 2")
    _require(cfg["smprt"]["n"] >= 1, "smprt.n must be >= 1")
    _require(cfg["smprt"]["noise_level"] >= 0, "smprt.noise_level must be >= 0")
    _require(cfg["eval_samples"] >= 1, "eval_samples must be >= 1")
    _require(isinstance(cfg["curves"], bool), "curves must be a boolean")

    me = cfg["metaeval"]
    _require(isinstance(me["enabled"], bool), "metaeval.enabled must be a boolean")
    _require(me["K"] >= 2, "metaeval.K must be >= 2")
    _require(me["iterations"] >= 1, "metaeval.iterations must be >= 1")
    _require(me["n_test"] >= 4, "metaeval.n_test must be >= 4")
    for metric in me["metrics"]:
        _check_enum(metric, METRIC_IDS, "metaeval.metrics entry")
    _require(isinstance(me["method_sets"], dict) and me["method_sets"],
             "metaeval.method_sets must be a non-empty object")
    for set_name, methods in me["method_sets"].items():
        _check_methods(methods, f"metaeval.method_sets.{set_name}")
    if me["specs"] is not None:
        _require(isinstance(me["specs"], list) and me["specs"],
                 "metaeval.specs must be a non-empty list or null")
        from .metaeval import PerturbationSpec
        for i, spec in enumerate(me["specs"]):
            _require(isinstance(spec, dict), f"metaeval.specs[{i}] must be an object")
            PerturbationSpec(**spec)


def resolve_config(user: dict | None = None) -> dict:
    """Merge a user document over the defaults and validate everything."""
    cfg = _merge(DEFAULT_CONFIG, user or {}, "")
    _validate(cfg)
    return cfg


def load_config(path: str | None = None) -> dict:
    """Read a JSON config file; None gives the resolved defaults."""
    if path is None:
        return resolve_config({})
    with open(path, "r", encoding="utf-8") as fh:
        try:
            user = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return resolve_config(user)


def config_hash(cfg: dict) -> str:
    """Short stable id of the semantic config content."""
    basis = {k: v for k, v in cfg.items() if k not in _NON_SEMANTIC_KEYS}
    blob = json.dumps(basis, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


def dump_config(cfg: dict) -> str:
    return json.dumps(cfg, indent=1, sort_keys=True) + "\n"
