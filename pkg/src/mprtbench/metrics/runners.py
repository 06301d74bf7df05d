"""The three randomisation-test metrics and their curve/score machinery.

A run explains every test sample under the original model and under each
randomised stage, then scores per-sample agreement (similarity metrics) or
complexity change (entropy metric). Explanation target classes are the
original model's predictions and stay fixed across stages. Stochastic
explanation noise is drawn once per run and reused at every stage so the
only thing that varies along a curve is the model state; the random baseline
is the deliberate exception, redrawn per stage so model-independence shows
up as chance-level similarity rather than a perfect score.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..attribution.methods import MethodConfig, explain_batch
from ..attribution.preprocess import normalise_array
from ..data import Dataset
from ..engine.layers import softmax
from ..engine.model import Model, logits_batch, predict_batch
from ..errors import AllZeroAttributionError, DegenerateComplexityError
from ..randomisation import ORDER_FULL_ONLY, RandomisationPlan, randomise_layers
from ..seeding import derive_seed
from .complexity import histogram_entropy, model_output_entropy
from .similarity import compare_maps

METRIC_IDS = ("MPRT", "sMPRT", "eMPRT")

# Rows per backward pass are capped so sample_count x method expansion cannot
# blow up activation memory; chunk boundaries depend only on the config.
_TARGET_ROWS = 8192


@dataclass
class QualityEstimate:
    value: float
    metric: str
    method: str
    sample_id: int
    seed: int


@dataclass
class CurveResult:
    metric: str
    method: str
    stages: list                     # (stage_label, mean, std, n)
    plan: RandomisationPlan | None
    meta: dict = field(default_factory=dict)

    @property
    def stage_labels(self) -> list:
        return [s[0] for s in self.stages]

    @property
    def means(self) -> np.ndarray:
        return np.array([s[1] for s in self.stages], dtype=np.float64)


@dataclass
class MprtResult:
    curve: CurveResult
    estimates: list                  # final-stage QualityEstimate per sample
    scores: np.ndarray               # [n_stages, n_samples]
    stage_labels: list


@dataclass
class EmprtResult:
    estimates: list                  # valid samples only
    scores: np.ndarray               # [n_samples], NaN where degenerate
    aggregate: float
    degenerate_count: int
    xi_orig: np.ndarray
    xi_final: np.ndarray
    meta: dict = field(default_factory=dict)


def _expansion(cfg: MethodConfig) -> int:
    if cfg.method == "IntegratedGradients":
        return cfg.steps
    if cfg.method in ("SmoothGrad", "GradientSHAP"):
        return cfg.samples
    return 1


def _chunked_explain(model: Model, xs: np.ndarray, classes: np.ndarray,
                     cfg: MethodConfig, base_seed: int) -> np.ndarray:
    chunk = max(1, _TARGET_ROWS // _expansion(cfg))
    if len(xs) <= chunk:
        return explain_batch(model, xs, classes, cfg, derive_seed(base_seed, "chunk", 0))
    parts = []
    for ci, start in enumerate(range(0, len(xs), chunk)):
        parts.append(explain_batch(model, xs[start:start + chunk], classes[start:start + chunk],
                                   cfg, derive_seed(base_seed, "chunk", ci)))
    return np.concatenate(parts)


def _eval_samples(dataset: Dataset):
    xs = dataset.test_inputs
    if len(xs) == 0:
        xs = dataset.inputs
    if len(xs) == 0:
        raise ValueError("dataset is empty")
    return np.ascontiguousarray(xs, dtype=np.float32)


def _normalise_rows(values: np.ndarray, zero_maps: str = "error") -> np.ndarray:
    """Second-moment normalise each sample's map.

    An all-zero map has no defined normalisation; zero_maps selects between
    failing loudly (the default) and marking the sample NaN so a harness can
    keep scoring the rest of a batch (broken models produce zero maps
    legitimately, e.g. a saturated weighted-activation method).
    """
    rows = []
    for v in values:
        try:
            rows.append(normalise_array(v))
        except AllZeroAttributionError:
            if zero_maps != "nan":
                raise
            rows.append(np.full(v.shape, np.nan))
    return np.stack(rows)


def _stage_stats(row: np.ndarray):
    finite = row[np.isfinite(row)]
    if len(finite) == 0:
        return float("nan"), float("nan"), 0
    return float(finite.mean()), float(finite.std()), int(len(finite))


def _stage_seed(seed: int, cfg: MethodConfig, stage_label: str, redraw: bool) -> int:
    if cfg.method == "RandomBaseline" and redraw:
        return derive_seed(seed, "explain", stage_label)
    return derive_seed(seed, "explain")


def _score_rows(rho: str, ref: np.ndarray, cur: np.ndarray, out: np.ndarray) -> None:
    for i in range(len(ref)):
        if np.isnan(ref[i]).any() or np.isnan(cur[i]).any():
            out[i] = np.nan
        else:
            out[i] = compare_maps(rho, ref[i], cur[i])


def run_mprt(model: Model, dataset: Dataset, explainer_cfg: MethodConfig,
             plan: RandomisationPlan, rho: str = "SSIM", seed: int | None = None,
             redraw_random_baseline: bool = True, zero_maps: str = "error") -> MprtResult:
    """Per-stage similarity between original and randomised-model explanations.

    Explanations are second-moment normalised before comparison. The
    per-sample scalar is the final-stage (fully randomised) similarity.
    With zero_maps="nan", samples with an all-zero map score NaN at the
    affected stages instead of raising; stage means then cover the finite
    samples only.
    """
    cfg = explainer_cfg.resolved()
    seed = plan.seed if seed is None else seed
    xs = _eval_samples(dataset)
    classes = predict_batch(model, xs)
    states = randomise_layers(model, plan)

    base = _stage_seed(seed, cfg, "orig_reference", redraw=False)
    e0 = _chunked_explain(model, xs, classes, cfg, base)
    e0n = _normalise_rows(e0, zero_maps)

    scores = np.empty((len(states), len(xs)), dtype=np.float64)
    for si, state in enumerate(states):
        if si == 0:
            ehn = e0n
        else:
            s_seed = _stage_seed(seed, cfg, state.stage_label, redraw_random_baseline)
            eh = _chunked_explain(state.model, xs, classes, cfg, s_seed)
            ehn = _normalise_rows(eh, zero_maps)
        _score_rows(rho, e0n, ehn, scores[si])

    stages = [(state.stage_label,) + _stage_stats(scores[si])
              for si, state in enumerate(states)]
    curve = CurveResult(metric="MPRT", method=cfg.method, stages=stages, plan=plan,
                        meta={"rho": rho, "seed": seed, "normalised": True,
                              "nan_scores": int(np.isnan(scores).sum())})
    estimates = [QualityEstimate(float(scores[-1, i]), "MPRT", cfg.method, i, seed)
                 for i in range(len(xs))]
    return MprtResult(curve, estimates, scores, [s.stage_label for s in states])


def run_smprt(model: Model, dataset: Dataset, explainer_cfg: MethodConfig,
              plan: RandomisationPlan, rho: str = "SSIM", n: int = 50,
              noise_level: float = 0.2, seed: int | None = None,
              redraw_random_baseline: bool = True, zero_maps: str = "error") -> MprtResult:
    """Denoised variant: each stage explains N noise-perturbed input copies
    (sigma = noise_level * per-sample value range) and compares the averaged
    maps. n=1 with noise_level=0 reproduces the plain run exactly.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    cfg = explainer_cfg.resolved()
    seed = plan.seed if seed is None else seed
    xs = _eval_samples(dataset)
    b = len(xs)
    classes = predict_batch(model, xs)
    states = randomise_layers(model, plan)

    from ..attribution.methods import _sample_ranges
    from ..seeding import derive_rng
    sigma = noise_level * _sample_ranges(xs)
    noise = derive_rng(seed, "noisy_inputs").standard_normal((b, n) + xs.shape[1:],
                                                             dtype=np.float32) * sigma[:, None]
    noisy = (xs[:, None] + noise).reshape((b * n,) + xs.shape[1:])
    classes_rep = np.repeat(classes, n)

    def mean_explanation(state_model, s_seed):
        vals = _chunked_explain(state_model, noisy, classes_rep, cfg, s_seed)
        return vals.reshape((b, n) + xs.shape[1:]).mean(axis=1)

    base = _stage_seed(seed, cfg, "orig_reference", redraw=False)
    e0n = _normalise_rows(mean_explanation(model, base), zero_maps)

    scores = np.empty((len(states), b), dtype=np.float64)
    for si, state in enumerate(states):
        if si == 0:
            ehn = e0n
        else:
            s_seed = _stage_seed(seed, cfg, state.stage_label, redraw_random_baseline)
            ehn = _normalise_rows(mean_explanation(state.model, s_seed), zero_maps)
        _score_rows(rho, e0n, ehn, scores[si])

    stages = [(state.stage_label,) + _stage_stats(scores[si])
              for si, state in enumerate(states)]
    curve = CurveResult(metric="sMPRT", method=cfg.method, stages=stages, plan=plan,
                        meta={"rho": rho, "seed": seed, "n": n, "noise_level": noise_level,
                              "normalised": True, "nan_scores": int(np.isnan(scores).sum())})
    estimates = [QualityEstimate(float(scores[-1, i]), "sMPRT", cfg.method, i, seed)
                 for i in range(b)]
    return MprtResult(curve, estimates, scores, [s.stage_label for s in states])


def run_emprt(model: Model, dataset: Dataset, explainer_cfg: MethodConfig,
              xi_bins: int = 100, seed: int = 0, aggregate: str = "mean",
              reinit: str = "ScaledNormal",
              redraw_random_baseline: bool = True) -> EmprtResult:
    """Relative complexity rise between original and fully randomised model.

    q = (xi(e_hat) - xi(e)) / xi(e) per sample, histogram entropy as xi.
    Method-mandated sign rules apply but no second-moment normalisation (the
    entropy's data-driven bins already make it scale-free). Samples whose
    original attribution has zero complexity are excluded and counted.
    """
    if aggregate not in ("mean", "median"):
        raise ValueError("aggregate must be 'mean' or 'median'")
    cfg = explainer_cfg.resolved()
    xs = _eval_samples(dataset)
    classes = predict_batch(model, xs)
    plan = RandomisationPlan(order=ORDER_FULL_ONLY, reinit=reinit, seed=seed)
    states = randomise_layers(model, plan)

    base = _stage_seed(seed, cfg, "orig_reference", redraw=False)
    e = _chunked_explain(model, xs, classes, cfg, base)
    s_seed = _stage_seed(seed, cfg, "final", redraw_random_baseline)
    eh = _chunked_explain(states[1].model, xs, classes, cfg, s_seed)

    xi_orig = np.array([histogram_entropy(e[i], xi_bins) for i in range(len(xs))])
    xi_final = np.array([histogram_entropy(eh[i], xi_bins) for i in range(len(xs))])

    scores = np.full(len(xs), np.nan)
    estimates = []
    degenerate = 0
    for i in range(len(xs)):
        if xi_orig[i] == 0.0:
            degenerate += 1
            continue
        q = (xi_final[i] - xi_orig[i]) / xi_orig[i]
        scores[i] = q
        estimates.append(QualityEstimate(float(q), "eMPRT", cfg.method, i, seed))
    if not estimates:
        raise DegenerateComplexityError(
            "every sample had zero original attribution complexity")
    valid = scores[np.isfinite(scores)]
    agg = float(np.mean(valid)) if aggregate == "mean" else float(np.median(valid))
    return EmprtResult(estimates=estimates, scores=scores, aggregate=agg,
                       degenerate_count=degenerate, xi_orig=xi_orig, xi_final=xi_final,
                       meta={"xi_bins": xi_bins, "seed": seed, "aggregate": aggregate,
                             "reinit": reinit})


def emprt_complexity_curve(model: Model, dataset: Dataset, explainer_cfg: MethodConfig,
                           plan: RandomisationPlan, xi_bins: int = 100,
                           seed: int | None = None,
                           redraw_random_baseline: bool = True):
    """Stage-wise attribution complexity plus model output entropy.

    Returns (complexity curve, model-entropy curve) over the plan's stages;
    the second feeds the model-entropy line of complexity plots.
    """
    cfg = explainer_cfg.resolved()
    seed = plan.seed if seed is None else seed
    xs = _eval_samples(dataset)
    classes = predict_batch(model, xs)
    states = randomise_layers(model, plan)

    base = _stage_seed(seed, cfg, "orig_reference", redraw=False)
    xi_rows = []
    ent_rows = []
    for si, state in enumerate(states):
        s_seed = base if si == 0 else _stage_seed(seed, cfg, state.stage_label,
                                                  redraw_random_baseline)
        eh = _chunked_explain(state.model, xs, classes, cfg, s_seed)
        xis = np.array([histogram_entropy(eh[i], xi_bins) for i in range(len(xs))])
        probs = softmax(logits_batch(state.model, xs))
        ents = np.array([model_output_entropy(p) for p in probs])
        xi_rows.append((state.stage_label, float(xis.mean()), float(xis.std()), len(xs)))
        ent_rows.append((state.stage_label, float(ents.mean()), float(ents.std()), len(xs)))
    xi_curve = CurveResult(metric="eMPRT", method=cfg.method, stages=xi_rows, plan=plan,
                           meta={"xi_bins": xi_bins, "seed": seed, "quantity": "complexity"})
    ent_curve = CurveResult(metric="ModelEntropy", method=cfg.method, stages=ent_rows, plan=plan,
                            meta={"seed": seed, "quantity": "output_entropy_bits"})
    return xi_curve, ent_curve


def curve_auc(curve: CurveResult) -> float:
    """Trapezoidal area of the mean curve over unit-spaced stages."""
    means = curve.means
    if len(means) < 2:
        raise ValueError("need at least 2 stages for an AUC")
    return float(np.trapezoid(means)) if hasattr(np, "trapezoid") else float(np.trapz(means))


@dataclass
class RankRow:
    rank: int
    method: str
    score: float
    tied: bool


def rank_methods(aggregated: dict, metric: str) -> list:
    """Order methods best-first under the metric's orientation.

    eMPRT ranks by descending complexity rise; the similarity metrics rank by
    ascending final-stage similarity (lower = more parameter-sensitive).
    Equal scores are ordered by method name and flagged.
    """
    if metric not in METRIC_IDS:
        raise ValueError(f"unknown metric {metric!r}")
    if len(aggregated) < 2:
        raise ValueError("need at least 2 methods to rank")
    descending = metric == "eMPRT"
    items = sorted(aggregated.items(),
                   key=lambda kv: (-kv[1] if descending else kv[1], kv[0]))
    counts: dict = {}
    for _, score in items:
        counts[score] = counts.get(score, 0) + 1
    return [RankRow(rank=i + 1, method=name, score=float(score), tied=counts[score] > 1)
            for i, (name, score) in enumerate(items)]
