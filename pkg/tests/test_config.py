"""Config resolution, validation and the semantic hash."""

import json

import pytest

from mprtbench.config import (DEFAULT_CONFIG, config_hash, dump_config,
                              load_config, resolve_config)
from mprtbench.errors import ConfigError


def test_defaults_resolve_clean():
    cfg = resolve_config()
    assert cfg["dataset"]["kind"] == "synthetic"
    assert cfg["model"]["arch"] == "lenet"
    assert cfg["metrics"] == ["MPRT", "sMPRT", "eMPRT"]
    assert cfg["plan"]["order"] == "TopDown"
    assert cfg is not DEFAULT_CONFIG  # caller owns a private copy


def test_nested_override_merges():
    cfg = resolve_config({"model": {"epochs": 2}, "seed": 9})
    assert cfg["model"]["epochs"] == 2
    assert cfg["model"]["arch"] == "lenet"  # untouched sibling survives
    assert cfg["seed"] == 9


def test_method_params_replaced_wholesale():
    cfg = resolve_config({"method_params": {"SmoothGrad": {"samples": 8}}})
    assert cfg["method_params"] == {"SmoothGrad": {"samples": 8}}


def test_method_sets_accept_arbitrary_names():
    cfg = resolve_config({"metaeval": {"method_sets": {"mine": ["Gradient", "Saliency"]}}})
    assert cfg["metaeval"]["method_sets"] == {"mine": ["Gradient", "Saliency"]}
    assert cfg["metaeval"]["K"] == DEFAULT_CONFIG["metaeval"]["K"]


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError):
        resolve_config({"modle": {}})
    with pytest.raises(ConfigError):
        resolve_config({"model": {"epoochs": 3}})
    with pytest.raises(ConfigError):
        resolve_config({"metaeval": {"iterations": 2, "bogus": 1}})


def test_enum_and_range_validation():
    with pytest.raises(ConfigError):
        resolve_config({"model": {"arch": "vgg16"}})
    with pytest.raises(ConfigError):
        resolve_config({"metrics": ["MPRT", "DeepLift"]})
    with pytest.raises(ConfigError):
        resolve_config({"methods": ["Gradient", "NoSuchMethod"]})
    with pytest.raises(ConfigError):
        resolve_config({"plan": {"order": "Diagonal"}})
    with pytest.raises(ConfigError):
        resolve_config({"rho": "Cosine"})
    with pytest.raises(ConfigError):
        resolve_config({"model": {"epochs": -1}})
    with pytest.raises(ConfigError):
        resolve_config({"metaeval": {"method_sets": {"broken": ["NotAMethod", "Gradient"]}}})


def test_epochs_zero_is_legal():
    assert resolve_config({"model": {"epochs": 0}})["model"]["epochs"] == 0


def test_hash_ignores_out_and_threads():
    base = resolve_config()
    moved = resolve_config({"out": "elsewhere", "threads": 8})
    assert config_hash(base) == config_hash(moved)
    assert len(config_hash(base)) == 12


def test_hash_tracks_semantic_changes():
    base = resolve_config()
    for override in ({"seed": 1}, {"model": {"epochs": 3}}, {"rho": "Pearson"},
                     {"methods": ["Gradient", "Saliency"]}):
        assert config_hash(resolve_config(override)) != config_hash(base)


def test_dump_config_is_canonical():
    cfg = resolve_config()
    text = dump_config(cfg)
    parsed = json.loads(text)
    assert parsed == {k: v for k, v in cfg.items()}
    assert dump_config(resolve_config()) == text


def test_load_config_from_file(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"seed": 4, "model": {"epochs": 1}}))
    cfg = load_config(str(path))
    assert cfg["seed"] == 4
    assert cfg["model"]["epochs"] == 1
    assert cfg["dataset"]["n_train"] == DEFAULT_CONFIG["dataset"]["n_train"]
    assert load_config(None)["seed"] == DEFAULT_CONFIG["seed"]


def test_load_config_rejects_non_object(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("[1, 2, 3]")
    with pytest.raises(ConfigError):
        load_config(str(path))
