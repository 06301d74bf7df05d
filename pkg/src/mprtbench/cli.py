"""Command-line front end.

Every subcommand loads the config file (or the built-in defaults), applies
the global flag overrides, runs its cells, and prints one status line per
cell plus a final summary with the config hash. Exit status is 0 only when
every cell succeeded.
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import config_hash, load_config
from .data import save_dataset
from .engine.io import save_model
from .errors import MprtBenchError
from .experiment import (build_dataset, build_trained_model, derive_experiment_config,
                         export_explanations, plot_from_artifacts, run_bin_change,
                         run_experiment, run_layer_order, single_metric_config)


def _add_global_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="path to a JSON config file")
    parser.add_argument("--seed", type=int, default=None, help="override the top-level seed")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--threads", type=int, default=None, help="concurrent cells")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mprtbench",
        description="Parameter-randomisation bench for attribution methods: run the "
                    "similarity, denoised and complexity-rise tests, rank methods, and "
                    "meta-evaluate the tests themselves.")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
            ("gen-data", "generate (or load) the dataset and save it"),
            ("train", "train the configured model and save it"),
            ("explain", "dump attribution maps and a summary table"),
            ("mprt", "run the plain randomisation similarity test"),
            ("smprt", "run the denoised (averaged-explanation) variant"),
            ("emprt", "run the complexity-rise variant"),
            ("layer-order", "run both randomisation orders and compare"),
            ("bin-change", "relevance change by magnitude bin after one-layer "
                           "randomisation"),
            ("metaeval", "meta-evaluate the configured metrics"),
            ("plot", "rebuild figures from existing CSV/JSON artifacts"),
            ("all", "full experiment: metrics, ranking, meta-evaluation, figures")):
        p = sub.add_parser(name, help=help_text)
        _add_global_flags(p)
        if name == "smprt":
            p.add_argument("--n", type=int, default=None,
                           help="explanations averaged per sample")
            p.add_argument("--noise", type=float, default=None,
                           help="noise level as a fraction of each sample's value range")
        if name == "bin-change":
            p.add_argument("--layer", type=int, default=None,
                           help="layer index whose relevance is inspected")
    return parser


def _load(args) -> dict:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.out is not None:
        cfg["out"] = args.out
    if args.threads is not None:
        cfg["threads"] = args.threads
    return cfg


def _report(manifest: dict) -> int:
    for cell in manifest["cells"]:
        if cell["status"] == "ok":
            print(f"ok      {cell['cell_id']}")
        elif cell["status"] == "skipped":
            print(f"skipped {cell['cell_id']}")
        else:
            print(f"FAILED  {cell['cell_id']}  {cell['error_class']}: {cell['error']}")
    n_failed = manifest.get("n_failed", 0)
    print(f"{len(manifest['cells'])} cells, {n_failed} failed  "
          f"(config={manifest['config_hash']} seed={manifest.get('seed', '?')})")
    return 0 if n_failed == 0 else 1


def _cmd_gen_data(cfg: dict) -> int:
    dataset = build_dataset(cfg)
    out_dir = os.path.join(cfg["out"], "dataset")
    save_dataset(dataset, out_dir)
    n_train = int((dataset.split == "train").sum())
    n_test = int((dataset.split == "test").sum())
    print(f"wrote {out_dir}: {n_train} train / {n_test} test samples, "
          f"{dataset.num_classes} classes (config={config_hash(cfg)} seed={cfg['seed']})")
    return 0


def _cmd_train(cfg: dict) -> int:
    dataset = build_dataset(cfg)
    model = build_trained_model(cfg, dataset)
    mc = cfg["model"]
    stem = os.path.join(cfg["out"], "models", f"{mc['arch']}_seed{mc['seed']}")
    save_model(model, stem)
    meta = model.metadata
    print(f"wrote {stem}.manifest/.weights: train acc {meta['train_accuracy']:.3f}, "
          f"test acc {meta['test_accuracy']:.3f} "
          f"(config={config_hash(cfg)} seed={cfg['seed']})")
    return 0


def _cmd_metaeval(cfg: dict) -> int:
    me = cfg["metaeval"]
    for name, methods in sorted(me["method_sets"].items()):
        if len(methods) < 2:
            print(f"error: >= 2 methods required; method set {name!r} has {len(methods)}",
                  file=sys.stderr)
            return 2
    derived = derive_experiment_config(cfg, metrics=[])
    derived["metaeval"] = dict(me, enabled=True)
    derived["curves"] = False
    return _report(run_experiment(derived))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
        if args.command == "gen-data":
            return _cmd_gen_data(cfg)
        if args.command == "train":
            return _cmd_train(cfg)
        if args.command == "explain":
            return _report(export_explanations(cfg))
        if args.command == "mprt":
            return _report(run_experiment(single_metric_config(cfg, "MPRT")))
        if args.command == "smprt":
            smprt = dict(cfg["smprt"])
            if args.n is not None:
                smprt["n"] = args.n
            if args.noise is not None:
                smprt["noise_level"] = args.noise
            return _report(run_experiment(single_metric_config(cfg, "sMPRT", smprt=smprt)))
        if args.command == "emprt":
            return _report(run_experiment(single_metric_config(cfg, "eMPRT")))
        if args.command == "layer-order":
            return _report(run_layer_order(cfg))
        if args.command == "bin-change":
            return _report(run_bin_change(cfg, layer_index=args.layer))
        if args.command == "metaeval":
            return _cmd_metaeval(cfg)
        if args.command == "plot":
            return _report(plot_from_artifacts(cfg))
        if args.command == "all":
            return _report(run_experiment(cfg))
        raise AssertionError(f"unhandled command {args.command}")
    except MprtBenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
