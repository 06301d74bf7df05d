"""Config-driven experiment runner.

One call builds the dataset, trains the model, runs every configured
(metric, method) cell, ranks methods, optionally meta-evaluates the metrics
themselves, and emits CSV tables plus SVG figures under one output
directory. A manifest records the config hash, every seed and knob, and the
status of every cell; a failed cell is recorded with its error class and the
run continues, so partial results never look complete.

Determinism contract: with an identical resolved config (same hash), a rerun
produces byte-identical files. Nothing here writes timestamps or
machine-specific values, and concurrency only distributes whole cells, each
of which owns its output files.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .attribution import MethodConfig, explain_batch
from .config import config_hash
from .csvio import write_rows
from .data import Dataset, generate_synthetic, load_idx_dataset, save_dataset, subset
from .engine.io import save_model
from .engine.model import Model, predict_batch
from .engine.train import TrainConfig, train
from .errors import MprtBenchError
from .metaeval import MetricScorer, PerturbationSpec, default_specs, meta_evaluate, write_mc_csv
from .metrics.complexity import histogram_entropy
from .metrics.reports import (aggregate_scores, read_accuracy_csv, read_curves_csv,
                              read_ranking_csv, write_accuracy_csv, write_curves_csv,
                              write_ranking_csv, write_scores_csv)
from .metrics.runners import (CurveResult, emprt_complexity_curve, rank_methods,
                              run_emprt, run_mprt, run_smprt)
from .randomisation import (RandomisationPlan, accuracy_under_randomisation,
                            bin_change_analysis, randomise_layers)
from .seeding import derive_seed
from .svgplot import Series, bar_chart, line_plot

METRIC_COLORS = {"MPRT": "#1f77b4", "sMPRT": "#9467bd", "eMPRT": "#d62728"}

EXPLAIN_HEADER = ["method", "sample_id", "class", "min", "max", "mean", "entropy"]

ORDER_COMPARISON_HEADER = ["metric", "method", "order", "final_mean", "final_std", "n"]

BIN_CHANGE_HEADER = ["method", "order", "layer_index", "randomised_layer", "bin_index",
                     "bin_low", "bin_high", "mean_abs_change", "n_samples", "seed"]


@dataclass
class CellRecord:
    cell_id: str
    status: str                  # ok | failed | skipped
    error_class: str | None = None
    error: str | None = None
    outputs: list = None

    def as_dict(self) -> dict:
        return {"cell_id": self.cell_id, "status": self.status,
                "error_class": self.error_class, "error": self.error,
                "outputs": self.outputs or []}


def build_dataset(cfg: dict) -> Dataset:
    ds = cfg["dataset"]
    if ds["kind"] == "idx":
        return load_idx_dataset(ds["images_path"], ds["labels_path"],
                                n_train=ds["n_train"], n_test=ds["n_test"],
                                num_classes=ds["num_classes"])
    return generate_synthetic(n_train=ds["n_train"], n_test=ds["n_test"],
                              num_classes=ds["num_classes"], image_size=ds["image_size"],
                              noise=ds["noise"], seed=ds["seed"])


def build_trained_model(cfg: dict, dataset: Dataset) -> Model:
    mc = cfg["model"]
    tc = TrainConfig(arch=mc["arch"], epochs=mc["epochs"], learning_rate=mc["learning_rate"],
                     momentum=mc["momentum"], batch_size=mc["batch_size"])
    return train(tc, dataset, seed=mc["seed"])


def _plan(cfg: dict) -> RandomisationPlan:
    plan = cfg["plan"]
    return RandomisationPlan(order=plan["order"], reinit=plan["reinit"], seed=plan["seed"])


def _method_cfg(cfg: dict, method: str) -> MethodConfig:
    return MethodConfig(method, **cfg["method_params"].get(method, {}))


def _run_cell(cell_id: str, fn) -> CellRecord:
    try:
        outputs = fn()
    except MprtBenchError as exc:
        return CellRecord(cell_id, "failed", type(exc).__name__, str(exc), [])
    except Exception as exc:
        return CellRecord(cell_id, "failed", type(exc).__name__, str(exc), [])
    return CellRecord(cell_id, "ok", outputs=outputs)


class _Runner:
    """Holds the shared state one experiment needs across its cells."""

    def __init__(self, cfg: dict, out: str | None = None):
        self.cfg = cfg
        self.out = out or cfg["out"]
        self.hash = config_hash(cfg)
        self.seed = cfg["seed"]
        self.dataset = build_dataset(cfg)
        self.model = build_trained_model(cfg, self.dataset)
        self.eval_ds = subset(self.dataset, n_train=0, n_test=cfg["eval_samples"])
        self.results: dict = {}          # (metric, method) -> per-sample scores
        self.curves: dict = {}           # (metric, method) -> list of CurveResult
        self.mc_scores: dict = {}        # (metric, set_name) -> MCScore

    def path(self, *parts) -> str:
        return os.path.join(self.out, *parts)

    def rel(self, *parts) -> str:
        return "/".join(parts)

    # ---- cells ----------------------------------------------------------

    def save_inputs_cell(self):
        outputs = []
        ds_dir = self.path("dataset")
        save_dataset(self.dataset, ds_dir)
        outputs.append(self.rel("dataset", "meta.json"))
        mc = self.cfg["model"]
        stem = f"{mc['arch']}_seed{mc['seed']}"
        save_model(self.model, self.path("models", stem))
        outputs.append(self.rel("models", stem + ".manifest"))
        outputs.append(self.rel("models", stem + ".weights"))
        return outputs

    def metric_cell(self, metric: str, method: str):
        cfg = self.cfg
        mcfg = _method_cfg(cfg, method)
        plan = _plan(cfg)
        outputs = []
        curves = []
        if metric == "eMPRT":
            res = run_emprt(self.model, self.eval_ds, mcfg, xi_bins=cfg["xi_bins"],
                            seed=self.seed, reinit=plan.reinit)
            scores = res.scores
            if cfg["curves"]:
                xi_curve, ent_curve = emprt_complexity_curve(
                    self.model, self.eval_ds, mcfg, plan=plan, xi_bins=cfg["xi_bins"],
                    seed=self.seed)
                curves = [xi_curve, ent_curve]
        else:
            runner = run_mprt if metric == "MPRT" else run_smprt
            # Randomised models legitimately emit all-zero maps for some
            # methods; in a batch run those samples score NaN instead of
            # aborting the cell (stage n/nan_scores keep the loss visible).
            kwargs = {"rho": cfg["rho"], "seed": self.seed, "zero_maps": "nan"}
            if metric == "sMPRT":
                kwargs.update(n=cfg["smprt"]["n"], noise_level=cfg["smprt"]["noise_level"])
            res = runner(self.model, self.eval_ds, mcfg, plan, **kwargs)
            scores = res.scores[-1]
            if cfg["curves"]:
                curves = [res.curve]
        score_rel = self.rel("scores", f"{metric}_{method}.csv")
        write_scores_csv(metric, method, scores, self.path(score_rel),
                         config_hash=self.hash, seed=self.seed)
        outputs.append(score_rel)
        if curves:
            curve_rel = self.rel("curves", f"{metric}_{method}.csv")
            write_curves_csv(curves, self.path(curve_rel),
                             config_hash=self.hash, seed=self.seed)
            outputs.append(curve_rel)
        self.results[(metric, method)] = scores
        self.curves[(metric, method)] = curves
        return outputs

    def accuracy_cell(self):
        plan = _plan(self.cfg)
        states = randomise_layers(self.model, plan)
        rows = accuracy_under_randomisation(states, self.dataset)
        rel = self.rel("accuracy", f"{plan.order}.csv")
        write_accuracy_csv(rows, n_samples=len(self.dataset.test_inputs), seed=plan.seed,
                           path=self.path(rel), config_hash=self.hash)
        return [rel]

    def ranking_cell(self, metric: str):
        aggregated = {method: aggregate_scores(scores)
                      for (m, method), scores in sorted(self.results.items())
                      if m == metric and math.isfinite(aggregate_scores(scores))}
        ranking = rank_methods(aggregated, metric)
        rel = self.rel("rankings", f"{metric}.csv")
        write_ranking_csv(metric, ranking, self.path(rel),
                          config_hash=self.hash, seed=self.seed)
        return [rel]

    def metaeval_cell(self, metric: str, set_name: str):
        me = self.cfg["metaeval"]
        scorer = MetricScorer(metric=metric, rho=self.cfg["rho"], n_test=me["n_test"],
                              smprt_n=self.cfg["smprt"]["n"],
                              smprt_noise=self.cfg["smprt"]["noise_level"],
                              xi_bins=self.cfg["xi_bins"],
                              reinit=self.cfg["plan"]["reinit"],
                              method_params=self.cfg["method_params"])
        if me["specs"] is None:
            specs = default_specs(seed=self.seed, k=me["K"], iterations=me["iterations"])
        else:
            specs = tuple(PerturbationSpec(**d) for d in me["specs"])
        score = meta_evaluate(scorer, me["method_sets"][set_name], self.model,
                              self.dataset, specs=specs, K=me["K"],
                              iterations=me["iterations"], seed=self.seed,
                              method_set_id=set_name)
        self.mc_scores[(metric, set_name)] = score
        stem = f"{metric}_{set_name}"
        json_rel = self.rel("metaeval", stem + ".json")
        payload = dict(score.to_json_dict(), config_hash=self.hash, seed=self.seed)
        _write_json(self.path(json_rel), payload)
        csv_rel = self.rel("metaeval", stem + ".csv")
        write_mc_csv(score, self.path(csv_rel), config_hash=self.hash)
        return [json_rel, csv_rel]

    # ---- figures --------------------------------------------------------

    def plot_curves_cell(self, metric: str):
        entries = [(method, curves) for (m, method), curves in sorted(self.curves.items())
                   if m == metric and curves]
        return [_plot_similarity_curves(metric, entries, self.cfg, self.hash,
                                        self.seed, self.out)]

    def plot_complexity_cell(self):
        entries = [(method, curves) for (m, method), curves in sorted(self.curves.items())
                   if m == "eMPRT" and curves]
        return [_plot_complexity(entries, self.cfg["xi_bins"], self.hash, self.seed,
                                 self.out)]

    def plot_ranking_cell(self, metric: str):
        ranking = read_ranking_csv(self.path("rankings", f"{metric}.csv"))
        return [_plot_ranking(metric, ranking, self.hash, self.seed, self.out)]

    def plot_mc_cell(self):
        reports = [self.mc_scores[key] for key in sorted(self.mc_scores)]
        return [_plot_mc(reports, self.hash, self.seed, self.out)]


def _write_json(path: str, payload: dict) -> None:
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _plot_similarity_curves(metric, entries, cfg, hash_, seed, out) -> str:
    series = []
    stage_labels: list = []
    for method, curves in entries:
        curve = curves[0]
        if len(curve.stage_labels) > len(stage_labels):
            stage_labels = curve.stage_labels
        series.append(Series(label=method, values=list(curve.means),
                             std=[s[2] for s in curve.stages]))
    if not series:
        raise ValueError(f"no curves recorded for {metric}")
    rel = f"plots/{metric}_curves.svg"
    title = f"{metric}: explanation similarity under progressive randomisation"
    line_plot(series, stage_labels, title, f"{cfg['rho']} similarity",
              path=os.path.join(out, rel), config_hash=hash_, seed=seed)
    return rel


def _plot_complexity(entries, xi_bins, hash_, seed, out) -> str:
    series = []
    stage_labels: list = []
    entropy_series = None
    for method, curves in entries:
        xi_curve = next(c for c in curves if c.metric == "eMPRT")
        if len(xi_curve.stage_labels) > len(stage_labels):
            stage_labels = xi_curve.stage_labels
        series.append(Series(label=method, values=list(xi_curve.means),
                             std=[s[2] for s in xi_curve.stages]))
        if entropy_series is None:
            ent = next((c for c in curves if c.metric == "ModelEntropy"), None)
            if ent is not None:
                entropy_series = Series(label="ModelEntropy", values=list(ent.means),
                                        dash="5,4")
    if not series:
        raise ValueError("no complexity curves recorded")
    if entropy_series is not None:
        series.append(entropy_series)
    rel = "plots/eMPRT_complexity.svg"
    line_plot(series, stage_labels, "Attribution complexity under progressive randomisation",
              "histogram entropy (nats) / output entropy (bits)",
              path=os.path.join(out, rel), config_hash=hash_, seed=seed,
              ceiling=math.log(xi_bins), ceiling_label=f"entropy ceiling ln {xi_bins}")
    return rel


def _plot_ranking(metric, ranking, hash_, seed, out) -> str:
    items = [(row.method, row.score) for row in ranking]
    rel = f"plots/ranking_{metric}.svg"
    orientation = "higher is better" if metric == "eMPRT" else "lower is better"
    bar_chart(items, f"{metric} method ranking ({orientation})",
              f"aggregate {metric} score", path=os.path.join(out, rel),
              config_hash=hash_, seed=seed)
    return rel


def _plot_mc(reports, hash_, seed, out) -> str:
    items = []
    errors = []
    for score in reports:
        items.append((f"{score.metric}\n{score.method_set_id}", score.value,
                      METRIC_COLORS.get(score.metric, "#555555")))
        errors.append(score.mc_std)
    rel = "plots/mc_scores.svg"
    bar_chart(items, "Meta-consistency by metric and method set", "MC score",
              path=os.path.join(out, rel), config_hash=hash_, seed=seed, errors=errors)
    return rel


def run_experiment(cfg: dict, out: str | None = None, threads: int | None = None) -> dict:
    """Execute every configured cell and write the artifact directory.

    Returns the manifest (also written to <out>/manifest.json).
    """
    out = out or cfg["out"]
    threads = threads if threads is not None else cfg["threads"]
    records: list = []
    planned: list = []

    try:
        runner = _Runner(cfg, out)
        setup_error = None
    except Exception as exc:
        runner = None
        setup_error = exc

    metric_cells = [(metric, method) for metric in cfg["metrics"]
                    for method in cfg["methods"]]
    me = cfg["metaeval"]
    me_cells = []
    if me["enabled"]:
        me_cells = [(metric, set_name) for metric in me["metrics"]
                    for set_name in sorted(me["method_sets"])]

    planned.append("setup")
    planned.extend(f"metric:{m}:{meth}" for m, meth in metric_cells)
    planned.append(f"accuracy:{cfg['plan']['order']}")
    planned.extend(f"ranking:{m}" for m in cfg["metrics"])
    planned.extend(f"metaeval:{m}:{s}" for m, s in me_cells)

    if setup_error is not None:
        records.append(CellRecord("setup", "failed", type(setup_error).__name__,
                                  str(setup_error), []))
        for cell_id in planned[1:]:
            records.append(CellRecord(cell_id, "skipped"))
        return _finish_manifest(cfg, out, records)

    records.append(_run_cell("setup", runner.save_inputs_cell))

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        futures = [(f"metric:{m}:{meth}",
                    pool.submit(_run_cell, f"metric:{m}:{meth}",
                                lambda m=m, meth=meth: runner.metric_cell(m, meth)))
                   for m, meth in metric_cells]
        futures.append((f"accuracy:{cfg['plan']['order']}",
                        pool.submit(_run_cell, f"accuracy:{cfg['plan']['order']}",
                                    runner.accuracy_cell)))
        for m, s in me_cells:
            futures.append((f"metaeval:{m}:{s}",
                            pool.submit(_run_cell, f"metaeval:{m}:{s}",
                                        lambda m=m, s=s: runner.metaeval_cell(m, s))))
        done = {cell_id: fut.result() for cell_id, fut in futures}
    for m, meth in metric_cells:
        records.append(done[f"metric:{m}:{meth}"])
    records.append(done[f"accuracy:{cfg['plan']['order']}"])

    for metric in cfg["metrics"]:
        records.append(_run_cell(f"ranking:{metric}",
                                 lambda metric=metric: runner.ranking_cell(metric)))
    for m, s in me_cells:
        records.append(done[f"metaeval:{m}:{s}"])

    if cfg["curves"]:
        for metric in cfg["metrics"]:
            if metric in ("MPRT", "sMPRT"):
                records.append(_run_cell(f"plot:curves:{metric}",
                                         lambda metric=metric: runner.plot_curves_cell(metric)))
        if "eMPRT" in cfg["metrics"]:
            records.append(_run_cell("plot:complexity", runner.plot_complexity_cell))
    for metric in cfg["metrics"]:
        records.append(_run_cell(f"plot:ranking:{metric}",
                                 lambda metric=metric: runner.plot_ranking_cell(metric)))
    if me_cells:
        records.append(_run_cell("plot:mc", runner.plot_mc_cell))

    return _finish_manifest(cfg, out, records)


def _finish_manifest(cfg: dict, out: str, records: list) -> dict:
    manifest = {
        "config_hash": config_hash(cfg),
        "seed": cfg["seed"],
        "config": {k: v for k, v in cfg.items() if k not in ("out", "threads")},
        "cells": [r.as_dict() for r in records],
        "n_cells": len(records),
        "n_failed": sum(1 for r in records if r.status == "failed"),
        "n_skipped": sum(1 for r in records if r.status == "skipped"),
    }
    _write_json(os.path.join(out, "manifest.json"), manifest)
    # The echoed config is the semantic subset only: out/threads are excluded
    # from the hash, so they must not break byte-identity between runs.
    _write_json(os.path.join(out, "config.json"), manifest["config"])
    return manifest


def derive_experiment_config(cfg: dict, **overrides) -> dict:
    """Deep-copy a resolved config and replace top-level sections.

    The copy is a distinct semantic config (its hash changes with the
    overrides), so a derived run's artifacts never collide with the parent's.
    """
    out = json.loads(json.dumps(cfg))
    for key, value in overrides.items():
        if key not in out:
            raise KeyError(f"unknown config section {key!r}")
        out[key] = value
    return out


def single_metric_config(cfg: dict, metric: str, **extra) -> dict:
    derived = derive_experiment_config(cfg, metrics=[metric])
    derived["metaeval"] = dict(derived["metaeval"], enabled=False)
    for key, value in extra.items():
        derived[key] = value
    return derived


def run_layer_order(cfg: dict, out: str | None = None) -> dict:
    """Run the similarity test under both cumulative orders and compare.

    Emits per-order accuracy tables, per-order curve CSVs for every
    configured method, a comparison table of final-stage similarities, and a
    grouped bar figure. Methods whose randomisation sensitivity depends on
    direction show up as unequal bars.
    """
    out = out or cfg["out"]
    hash_ = config_hash(cfg)
    seed = cfg["seed"]
    records: list = []
    try:
        dataset = build_dataset(cfg)
        model = build_trained_model(cfg, dataset)
    except Exception as exc:
        records.append(CellRecord("setup", "failed", type(exc).__name__, str(exc), []))
        return _finish_manifest(cfg, out, records)
    records.append(CellRecord("setup", "ok", outputs=[]))
    eval_ds = subset(dataset, n_train=0, n_test=cfg["eval_samples"])
    comparison_rows = []
    finals: dict = {}

    for order in ("TopDown", "BottomUp"):
        plan = RandomisationPlan(order=order, reinit=cfg["plan"]["reinit"],
                                 seed=cfg["plan"]["seed"])

        def acc_cell(plan=plan, order=order):
            rows = accuracy_under_randomisation(randomise_layers(model, plan), dataset)
            rel = f"layer_order/accuracy_{order}.csv"
            write_accuracy_csv(rows, n_samples=len(dataset.test_inputs), seed=plan.seed,
                               path=os.path.join(out, rel), config_hash=hash_)
            return [rel]

        records.append(_run_cell(f"accuracy:{order}", acc_cell))
        for method in cfg["methods"]:

            def cell(method=method, plan=plan, order=order):
                res = run_mprt(model, eval_ds, _method_cfg(cfg, method), plan,
                               rho=cfg["rho"], seed=seed, zero_maps="nan")
                rel = f"layer_order/curves_{order}_{method}.csv"
                write_curves_csv([res.curve], os.path.join(out, rel),
                                 config_hash=hash_, seed=seed)
                label, mean, std, n = res.curve.stages[-1]
                comparison_rows.append(["MPRT", method, order, mean, std, n])
                finals[(method, order)] = mean
                return [rel]

            records.append(_run_cell(f"layer-order:{order}:{method}", cell))

    def comparison_cell():
        rel = "layer_order/comparison.csv"
        write_rows(os.path.join(out, rel), ORDER_COMPARISON_HEADER, comparison_rows,
                   [f"config={hash_} seed={seed}"])
        items = [(f"{method}\n{order}", finals[(method, order)])
                 for method in cfg["methods"] for order in ("TopDown", "BottomUp")
                 if (method, order) in finals and math.isfinite(finals[(method, order)])]
        plot_rel = "plots/layer_order_final_similarity.svg"
        bar_chart(items, "Final-stage similarity by randomisation order",
                  f"{cfg['rho']} at full randomisation", path=os.path.join(out, plot_rel),
                  config_hash=hash_, seed=seed)
        return [rel, plot_rel]

    records.append(_run_cell("layer-order:comparison", comparison_cell))
    return _finish_manifest(cfg, out, records)


def run_bin_change(cfg: dict, layer_index: int | None = None,
                   out: str | None = None) -> dict:
    """Magnitude-binned relevance change after single-layer randomisation,
    for every configured relevance-rule method."""
    out = out or cfg["out"]
    hash_ = config_hash(cfg)
    seed = cfg["seed"]
    records: list = []
    try:
        dataset = build_dataset(cfg)
        model = build_trained_model(cfg, dataset)
    except Exception as exc:
        records.append(CellRecord("setup", "failed", type(exc).__name__, str(exc), []))
        return _finish_manifest(cfg, out, records)
    records.append(CellRecord("setup", "ok", outputs=[]))
    eval_ds = subset(dataset, n_train=0, n_test=cfg["eval_samples"])
    plan = _plan(cfg)
    methods = [m for m in cfg["methods"] if m in ("LRP_Epsilon", "LRP_ZPlus")]
    if not methods:
        records.append(CellRecord("bin-change", "failed", "ConfigError",
                                  "bin-change analysis needs LRP_Epsilon or LRP_ZPlus "
                                  "in the method list", []))
        return _finish_manifest(cfg, out, records)
    if layer_index is None:
        # Inspect the relevance one parameterised layer away from the one the
        # plan randomises first, where the contrast is sharpest.
        params = model.param_layers
        layer_index = (params[-2] if plan.order == "TopDown" else params[1]).layer_index

    for method in methods:

        def cell(method=method):
            result = bin_change_analysis(model, layer_index, _method_cfg(cfg, method),
                                         eval_ds, plan, bins=cfg["xi_bins"])
            rows = [[method, plan.order, result.layer_index, result.randomised_layer,
                     b, float(result.edges[b]), float(result.edges[b + 1]), change,
                     result.n_samples, plan.seed] for b, change in result.rows]
            rel = f"bin_change/{method}_{plan.order}.csv"
            write_rows(os.path.join(out, rel), BIN_CHANGE_HEADER, rows,
                       [f"config={hash_} seed={seed}"])
            return [rel]

        records.append(_run_cell(f"bin-change:{method}", cell))
    return _finish_manifest(cfg, out, records)


def export_explanations(cfg: dict, out: str | None = None) -> dict:
    """The attribution dump: one .npy map stack per method plus a summary CSV."""
    out = out or cfg["out"]
    hash_ = config_hash(cfg)
    records: list = []
    try:
        dataset = build_dataset(cfg)
        model = build_trained_model(cfg, dataset)
    except Exception as exc:
        records.append(CellRecord("setup", "failed", type(exc).__name__, str(exc), []))
        return _finish_manifest(cfg, out, records)
    records.append(CellRecord("setup", "ok", outputs=[]))
    eval_ds = subset(dataset, n_train=0, n_test=cfg["eval_samples"])
    xs = np.ascontiguousarray(eval_ds.test_inputs, dtype=np.float32)
    classes = predict_batch(model, xs)
    summary_rows = []

    def dump(method: str):
        mcfg = _method_cfg(cfg, method).resolved()
        maps = explain_batch(model, xs, classes, mcfg,
                             derive_seed(cfg["seed"], "explain-dump", method))
        rel = f"explanations/{method}.npy"
        path = os.path.join(out, rel)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        np.save(path, maps.astype(np.float32))
        for i in range(len(maps)):
            summary_rows.append([method, i, int(classes[i]), float(maps[i].min()),
                                 float(maps[i].max()), float(maps[i].mean()),
                                 histogram_entropy(maps[i], cfg["xi_bins"])])
        return [rel]

    for method in cfg["methods"]:
        records.append(_run_cell(f"explain:{method}", lambda method=method: dump(method)))
    write_rows(os.path.join(out, "explanations", "summary.csv"), EXPLAIN_HEADER,
               summary_rows, [f"config={hash_} seed={cfg['seed']}"])
    records.append(CellRecord("explain:summary", "ok",
                              outputs=["explanations/summary.csv"]))
    return _finish_manifest(cfg, out, records)


def plot_from_artifacts(cfg: dict, out: str | None = None) -> dict:
    """Rebuild every figure from the CSV/JSON artifacts in an output directory."""
    out = out or cfg["out"]
    hash_ = config_hash(cfg)
    seed = cfg["seed"]
    records: list = []

    curves_dir = os.path.join(out, "curves")
    curves_by_metric: dict = {}
    if os.path.isdir(curves_dir):
        for name in sorted(os.listdir(curves_dir)):
            if not name.endswith(".csv"):
                continue
            for curve in read_curves_csv(os.path.join(curves_dir, name)):
                curves_by_metric.setdefault(curve.metric, []).append(curve)

    for metric in ("MPRT", "sMPRT"):
        if metric not in curves_by_metric:
            continue
        entries = [(c.method, [c]) for c in
                   sorted(curves_by_metric[metric], key=lambda c: c.method)]
        records.append(_run_cell(
            f"plot:curves:{metric}",
            lambda metric=metric, entries=entries: [_plot_similarity_curves(
                metric, entries, cfg, hash_, seed, out)]))

    if "eMPRT" in curves_by_metric:
        ent_by_method = {c.method: c for c in curves_by_metric.get("ModelEntropy", [])}
        entries = []
        for c in sorted(curves_by_metric["eMPRT"], key=lambda c: c.method):
            group = [c] + ([ent_by_method[c.method]] if c.method in ent_by_method else [])
            entries.append((c.method, group))
        records.append(_run_cell(
            "plot:complexity",
            lambda entries=entries: [_plot_complexity(entries, cfg["xi_bins"], hash_,
                                                      seed, out)]))

    rank_dir = os.path.join(out, "rankings")
    if os.path.isdir(rank_dir):
        for name in sorted(os.listdir(rank_dir)):
            if not name.endswith(".csv"):
                continue
            metric = name[:-4]
            records.append(_run_cell(
                f"plot:ranking:{metric}",
                lambda metric=metric, p=os.path.join(rank_dir, name): [_plot_ranking(
                    metric, read_ranking_csv(p), hash_, seed, out)]))

    me_dir = os.path.join(out, "metaeval")
    if os.path.isdir(me_dir):
        reports = []
        for name in sorted(os.listdir(me_dir)):
            if name.endswith(".json"):
                with open(os.path.join(me_dir, name), "r", encoding="utf-8") as fh:
                    reports.append(json.load(fh))
        if reports:
            items = [(f"{r['metric']}\n{r['method_set_id']}", r["mc_mean"],
                      METRIC_COLORS.get(r["metric"], "#555555")) for r in reports]
            errors = [r["mc_std"] for r in reports]
            records.append(_run_cell(
                "plot:mc",
                lambda: [_bar_to(out, items, errors, hash_, seed)]))

    manifest = {
        "config_hash": hash_,
        "seed": seed,
        "cells": [r.as_dict() for r in records],
        "n_cells": len(records),
        "n_failed": sum(1 for r in records if r.status == "failed"),
    }
    return manifest


def _bar_to(out, items, errors, hash_, seed) -> str:
    rel = "plots/mc_scores.svg"
    bar_chart(items, "Meta-consistency by metric and method set", "MC score",
              path=os.path.join(out, rel), config_hash=hash_, seed=seed, errors=errors)
    return rel
