"""CSV serialisation of curves, per-sample scores, rankings and accuracies.

Column layouts are part of the public interface and stay fixed:
curves (metric, method, stage_label, mean, std, n, seed), scores
(metric, method, sample_id, q_hat), stage accuracies (stage_label, accuracy,
n_samples, seed), rankings (metric, rank, method, score, tied). Every file
starts with a comment line carrying the config hash and seed.
"""

from __future__ import annotations

import math

from ..csvio import read_rows, write_rows
from .runners import CurveResult, RankRow

CURVE_HEADER = ["metric", "method", "stage_label", "mean", "std", "n", "seed"]
SCORE_HEADER = ["metric", "method", "sample_id", "q_hat"]
ACCURACY_HEADER = ["stage_label", "accuracy", "n_samples", "seed"]
RANKING_HEADER = ["metric", "rank", "method", "score", "tied"]


def _preamble(config_hash: str, seed) -> list:
    return [f"config={config_hash} seed={seed}"]


def write_curves_csv(curves: list, path: str, config_hash: str = "", seed=0) -> None:
    rows = []
    for curve in curves:
        curve_seed = curve.meta.get("seed", seed)
        for stage_label, mean, std, n in curve.stages:
            rows.append([curve.metric, curve.method, stage_label,
                         float(mean), float(std), int(n), curve_seed])
    write_rows(path, CURVE_HEADER, rows, _preamble(config_hash, seed))


def read_curves_csv(path: str) -> list:
    """Rebuild CurveResult objects (plan-less) from a curves CSV."""
    _, header, rows = read_rows(path)
    if header != CURVE_HEADER:
        raise ValueError(f"{path}: unexpected curve CSV header {header}")
    grouped: dict = {}
    for metric, method, stage_label, mean, std, n, curve_seed in rows:
        key = (metric, method)
        grouped.setdefault(key, []).append(
            (stage_label, float(mean), float(std), int(n)))
        grouped.setdefault("_seed", {})[key] = curve_seed
    out = []
    for key, stages in grouped.items():
        if key == "_seed":
            continue
        metric, method = key
        out.append(CurveResult(metric=metric, method=method, stages=stages, plan=None,
                               meta={"seed": grouped["_seed"][key]}))
    return out


def write_scores_csv(metric: str, method: str, scores, path: str,
                     config_hash: str = "", seed=0) -> None:
    rows = [[metric, method, i, float(q)] for i, q in enumerate(scores)]
    write_rows(path, SCORE_HEADER, rows, _preamble(config_hash, seed))


def write_accuracy_csv(stage_accuracies: list, n_samples: int, seed, path: str,
                       config_hash: str = "") -> None:
    rows = [[label, float(acc), int(n_samples), seed] for label, acc in stage_accuracies]
    write_rows(path, ACCURACY_HEADER, rows, _preamble(config_hash, seed))


def read_accuracy_csv(path: str) -> list:
    _, header, rows = read_rows(path)
    if header != ACCURACY_HEADER:
        raise ValueError(f"{path}: unexpected accuracy CSV header {header}")
    return [(label, float(acc)) for label, acc, _, _ in rows]


def write_ranking_csv(metric: str, ranking: list, path: str,
                      config_hash: str = "", seed=0) -> None:
    rows = [[metric, row.rank, row.method, row.score, row.tied] for row in ranking]
    write_rows(path, RANKING_HEADER, rows, _preamble(config_hash, seed))


def read_ranking_csv(path: str) -> list:
    _, header, rows = read_rows(path)
    if header != RANKING_HEADER:
        raise ValueError(f"{path}: unexpected ranking CSV header {header}")
    return [RankRow(rank=int(r), method=m, score=float(s), tied=t == "true")
            for _, r, m, s, t in rows]


def aggregate_scores(scores) -> float:
    """Mean over the finite per-sample scores; NaN if none."""
    finite = [s for s in scores if math.isfinite(s)]
    return sum(finite) / len(finite) if finite else float("nan")
