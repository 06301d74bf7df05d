"""End-to-end harness: experiment cells, manifest contract, CLI wiring."""

import json
import os

import numpy as np
import pytest

from mprtbench import cli, experiment
from mprtbench.config import config_hash, dump_config, resolve_config
from mprtbench.csvio import read_rows

# Small enough to rerun several times, big enough to exercise every cell kind.
_PATCH = {
    "dataset": {"n_train": 120, "n_test": 40},
    "model": {"epochs": 1},
    "eval_samples": 6,
    "methods": ["Gradient", "RandomBaseline"],
    "metrics": ["MPRT", "eMPRT"],
    "smprt": {"n": 2},
    "metaeval": {"enabled": True, "metrics": ["MPRT"],
                 "method_sets": {"duo": ["Gradient", "RandomBaseline"]},
                 "K": 2, "iterations": 1, "n_test": 6},
}

# Untrained-model variant for tests that only exercise wiring.
_FAST_PATCH = {
    "dataset": {"n_train": 40, "n_test": 16},
    "model": {"epochs": 0},
    "eval_samples": 4,
    "methods": ["Gradient", "RandomBaseline"],
    "metrics": ["MPRT"],
    "metaeval": {"enabled": False},
}


def _cfg(patch):
    return resolve_config(json.loads(json.dumps(patch)))


def _tree(root) -> dict:
    files = {}
    for dirpath, _, names in os.walk(root):
        for name in names:
            path = os.path.join(dirpath, name)
            with open(path, "rb") as fh:
                files[os.path.relpath(path, root)] = fh.read()
    return files


def _write_cfg(tmp_path, patch, name="cfg.json") -> str:
    path = tmp_path / name
    path.write_text(json.dumps(patch), encoding="utf-8")
    return str(path)


@pytest.fixture(scope="module")
def exp(tmp_path_factory):
    out = tmp_path_factory.mktemp("exp")
    cfg = _cfg(_PATCH)
    manifest = experiment.run_experiment(cfg, out=str(out), threads=1)
    return cfg, out, manifest


def test_manifest_contract(exp):
    cfg, out, manifest = exp
    assert manifest["config_hash"] == config_hash(cfg)
    assert manifest["seed"] == 0
    assert manifest["n_cells"] == len(manifest["cells"])
    assert manifest["n_failed"] == 0 and manifest["n_skipped"] == 0
    for cell in manifest["cells"]:
        assert cell["status"] == "ok"
        assert cell["error_class"] is None
        for rel in cell["outputs"]:
            assert (out / rel).exists(), rel
    # The echoed config is the semantic subset: no output path, no threads.
    assert "out" not in manifest["config"] and "threads" not in manifest["config"]
    assert manifest["config"]["seed"] == cfg["seed"]
    assert manifest["config"]["metrics"] == ["MPRT", "eMPRT"]
    with open(out / "manifest.json", encoding="utf-8") as fh:
        assert json.load(fh) == manifest
    with open(out / "config.json", encoding="utf-8") as fh:
        assert json.load(fh) == manifest["config"]


def test_all_cells_present(exp):
    _, _, manifest = exp
    ids = [c["cell_id"] for c in manifest["cells"]]
    assert ids == [
        "setup",
        "metric:MPRT:Gradient", "metric:MPRT:RandomBaseline",
        "metric:eMPRT:Gradient", "metric:eMPRT:RandomBaseline",
        "accuracy:TopDown",
        "ranking:MPRT", "ranking:eMPRT",
        "metaeval:MPRT:duo",
        "plot:curves:MPRT", "plot:complexity",
        "plot:ranking:MPRT", "plot:ranking:eMPRT",
        "plot:mc",
    ]


def test_score_csv_provenance(exp):
    cfg, out, _ = exp
    preamble, _, rows = read_rows(str(out / "scores" / "MPRT_Gradient.csv"))
    assert f"config={config_hash(cfg)} seed=0" in preamble
    assert len(rows) == cfg["eval_samples"]
    assert {row[0] for row in rows} == {"MPRT"}
    assert {row[1] for row in rows} == {"Gradient"}


def test_rerun_with_more_threads_is_byte_identical(exp, tmp_path):
    cfg, out, _ = exp
    manifest = experiment.run_experiment(_cfg(_PATCH), out=str(tmp_path), threads=3)
    assert manifest["n_failed"] == 0
    first, second = _tree(out), _tree(tmp_path)
    assert sorted(first) == sorted(second)
    for rel in first:
        assert first[rel] == second[rel], f"{rel} differs between runs"


def test_failed_cell_is_recorded_and_run_continues(monkeypatch, tmp_path):
    def boom(*args, **kwargs):
        raise RuntimeError("injected")

    monkeypatch.setattr(experiment, "run_mprt", boom)
    manifest = experiment.run_experiment(_cfg(_FAST_PATCH), out=str(tmp_path), threads=1)
    cells = {c["cell_id"]: c for c in manifest["cells"]}
    failed = cells["metric:MPRT:Gradient"]
    assert failed["status"] == "failed"
    assert failed["error_class"] == "RuntimeError"
    assert "injected" in failed["error"]
    assert failed["outputs"] == []
    # Independent cells still ran; the loss stays visible in the counts.
    assert cells["setup"]["status"] == "ok"
    assert cells["accuracy:TopDown"]["status"] == "ok"
    assert manifest["n_failed"] >= 3
    assert (tmp_path / "manifest.json").exists()


def test_cli_success_exit_and_report(tmp_path, capsys):
    cfg_path = _write_cfg(tmp_path, _FAST_PATCH)
    rc = cli.main(["emprt", "--config", cfg_path, "--out", str(tmp_path / "run")])
    out = capsys.readouterr().out
    assert rc == 0
    assert "ok      metric:eMPRT:Gradient" in out
    assert ", 0 failed" in out.splitlines()[-1]
    assert "(config=" in out.splitlines()[-1]


def test_cli_failure_exit(monkeypatch, tmp_path, capsys):
    def boom(*args, **kwargs):
        raise RuntimeError("injected")

    monkeypatch.setattr(experiment, "run_mprt", boom)
    cfg_path = _write_cfg(tmp_path, _FAST_PATCH)
    rc = cli.main(["mprt", "--config", cfg_path, "--out", str(tmp_path / "run")])
    assert rc == 1
    assert "FAILED  metric:MPRT:Gradient  RuntimeError" in capsys.readouterr().out


def test_cli_config_error_exit(tmp_path, capsys):
    bad = _write_cfg(tmp_path, {"rho": "Cosine"}, name="bad.json")
    rc = cli.main(["mprt", "--config", bad, "--out", str(tmp_path / "run")])
    assert rc == 2
    assert capsys.readouterr().err.startswith("error:")

    typo = _write_cfg(tmp_path, {"metohds": ["Gradient"]}, name="typo.json")
    assert cli.main(["mprt", "--config", typo]) == 2


def test_cli_metaeval_rejects_single_method_set(tmp_path, capsys):
    patch = dict(_FAST_PATCH,
                 metaeval={"enabled": True, "metrics": ["MPRT"],
                           "method_sets": {"solo": ["Gradient"]},
                           "K": 2, "iterations": 1, "n_test": 4})
    cfg_path = _write_cfg(tmp_path, patch)
    rc = cli.main(["metaeval", "--config", cfg_path, "--out", str(tmp_path / "run")])
    assert rc == 2
    assert ">= 2 methods" in capsys.readouterr().err


def test_cli_smprt_single_noiseless_draw_matches_plain(tmp_path):
    cfg_path = _write_cfg(tmp_path, _FAST_PATCH)
    a, b = str(tmp_path / "plain"), str(tmp_path / "denoised")
    assert cli.main(["mprt", "--config", cfg_path, "--out", a]) == 0
    assert cli.main(["smprt", "--config", cfg_path, "--out", b,
                     "--n", "1", "--noise", "0"]) == 0
    _, _, plain = read_rows(os.path.join(a, "scores", "MPRT_Gradient.csv"))
    _, _, denoised = read_rows(os.path.join(b, "scores", "sMPRT_Gradient.csv"))
    # Same sample ids, repr-identical scores; only the metric label differs.
    assert [r[2] for r in plain] == [r[2] for r in denoised]
    assert [r[3] for r in plain] == [r[3] for r in denoised]


def test_cli_plot_rebuilds_figures_byte_identical(exp, tmp_path):
    cfg, out, _ = exp
    before = {rel: data for rel, data in _tree(out).items() if rel.endswith(".svg")}
    assert len(before) == 5
    cfg_path = tmp_path / "resolved.json"
    cfg_path.write_text(dump_config(cfg), encoding="utf-8")
    rc = cli.main(["plot", "--config", str(cfg_path), "--out", str(out)])
    assert rc == 0
    after = {rel: data for rel, data in _tree(out).items() if rel.endswith(".svg")}
    assert before == after


def test_derive_experiment_config(exp):
    cfg, _, _ = exp
    derived = experiment.derive_experiment_config(cfg, seed=99)
    assert derived["seed"] == 99 and cfg["seed"] == 0
    assert config_hash(derived) != config_hash(cfg)
    derived["dataset"]["n_train"] = 1
    assert cfg["dataset"]["n_train"] == _PATCH["dataset"]["n_train"]
    with pytest.raises(KeyError):
        experiment.derive_experiment_config(cfg, no_such_section=1)


def test_single_metric_config(exp):
    cfg, _, _ = exp
    derived = experiment.single_metric_config(cfg, "sMPRT",
                                              smprt={"n": 1, "noise_level": 0.0})
    assert derived["metrics"] == ["sMPRT"]
    assert derived["metaeval"]["enabled"] is False
    assert derived["smprt"] == {"n": 1, "noise_level": 0.0}
    assert cfg["metrics"] == ["MPRT", "eMPRT"]
    assert cfg["metaeval"]["enabled"] is True


def test_run_layer_order(tmp_path):
    manifest = experiment.run_layer_order(_cfg(_FAST_PATCH), out=str(tmp_path))
    assert manifest["n_failed"] == 0
    ids = [c["cell_id"] for c in manifest["cells"]]
    for order in ("TopDown", "BottomUp"):
        assert f"accuracy:{order}" in ids
        assert f"layer-order:{order}:Gradient" in ids
        assert (tmp_path / "layer_order" / f"curves_{order}_Gradient.csv").exists()
    _, header, rows = read_rows(str(tmp_path / "layer_order" / "comparison.csv"))
    assert header == experiment.ORDER_COMPARISON_HEADER
    assert len(rows) == 4                     # 2 methods x 2 orders
    assert {r[2] for r in rows} == {"TopDown", "BottomUp"}
    for row in rows:
        float(row[3])                         # final_mean parses
        assert int(row[5]) == 4
    assert (tmp_path / "plots" / "layer_order_final_similarity.svg").exists()


def test_run_bin_change(tmp_path):
    patch = dict(_FAST_PATCH, methods=["LRP_Epsilon", "Gradient"], xi_bins=20)
    manifest = experiment.run_bin_change(_cfg(patch), out=str(tmp_path / "a"))
    assert manifest["n_failed"] == 0
    ids = [c["cell_id"] for c in manifest["cells"]]
    assert "bin-change:LRP_Epsilon" in ids
    assert "bin-change:Gradient" not in ids   # not a relevance rule
    _, header, rows = read_rows(str(tmp_path / "a" / "bin_change" /
                                    "LRP_Epsilon_TopDown.csv"))
    assert header == experiment.BIN_CHANGE_HEADER
    assert rows
    for row in rows:
        assert row[0] == "LRP_Epsilon"
        assert float(row[5]) < float(row[6])  # bin_low < bin_high
        assert float(row[7]) >= 0.0

    # Without a relevance-rule method the analysis refuses to run.
    manifest = experiment.run_bin_change(_cfg(_FAST_PATCH), out=str(tmp_path / "b"))
    assert manifest["n_failed"] == 1
    failed = [c for c in manifest["cells"] if c["status"] == "failed"][0]
    assert failed["error_class"] == "ConfigError"


def test_export_explanations(tmp_path):
    cfg = _cfg(_FAST_PATCH)
    manifest = experiment.export_explanations(cfg, out=str(tmp_path))
    assert manifest["n_failed"] == 0
    maps = np.load(tmp_path / "explanations" / "Gradient.npy")
    assert maps.shape == (4, 1, 8, 8)
    assert maps.dtype == np.float32
    _, header, rows = read_rows(str(tmp_path / "explanations" / "summary.csv"))
    assert header == experiment.EXPLAIN_HEADER
    assert len(rows) == 2 * 4                 # methods x eval samples
    for row in rows:
        assert 0 <= int(row[2]) < cfg["dataset"]["num_classes"]
        assert np.isfinite(float(row[6]))


def test_cli_gen_data_and_train(tmp_path, capsys):
    cfg_path = _write_cfg(tmp_path, _FAST_PATCH)
    out = str(tmp_path / "run")
    assert cli.main(["gen-data", "--config", cfg_path, "--out", out]) == 0
    assert "40 train / 16 test" in capsys.readouterr().out
    assert (tmp_path / "run" / "dataset" / "meta.json").exists()

    assert cli.main(["train", "--config", cfg_path, "--out", out]) == 0
    assert "test acc" in capsys.readouterr().out
    assert (tmp_path / "run" / "models" / "lenet_seed5.manifest").exists()
    assert (tmp_path / "run" / "models" / "lenet_seed5.weights").exists()
