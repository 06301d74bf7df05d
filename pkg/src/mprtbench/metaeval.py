"""Meta-consistency benchmarking of explanation-quality estimators.

How much should a metric's verdict be trusted? This module stress-tests a
quality estimator (a callable producing per-sample scores for one explanation
method on one model) with two perturbation tests at two severities each:

- input perturbation (IPT): additive elementwise uniform noise on the inputs,
- model perturbation (MPT): multiplicative elementwise Gaussian noise on all
  weights and biases.

A reliable estimator should barely move under Minor perturbations (noise
resilience, NR) and clearly react to Disruptive ones (adversary reactivity,
AR). Four components, each in [0, 1], summarise one test:

- iac_nr: mean Wilcoxon signed-rank p-value between unperturbed and
  Minor-perturbed per-sample scores (high p = same distribution = resilient),
- iac_ar: mean (1 - p) against Disruptively perturbed scores,
- iec_nr: fraction of method-pair orderings (by aggregate score) preserved
  under Minor perturbation, averaged over repetitions,
- iec_ar: fraction of (method, repetition) cells whose aggregate score is
  strictly worse under Disruptive perturbation, where "worse" respects the
  estimator's score orientation.

The MC score is the mean of the four components, averaged over both tests and
over independent iterations; the std across iterations is reported alongside.
These component definitions are explicit local conventions, chosen so the
optimum (scores unchanged under Minor, uniformly degraded under Disruptive)
reaches exactly 1. All knobs are echoed into every report.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .csvio import write_rows
from .data import Dataset, subset
from .attribution import MethodConfig
from .engine.model import Model, accuracy
from .errors import ConfigError, DegenerateComplexityError
from .metrics.runners import run_emprt, run_mprt, run_smprt
from .randomisation import ORDER_FULL_ONLY, RandomisationPlan
from .seeding import derive_rng, derive_seed
from .stats import wilcoxon_signed_rank_p

TEST_INPUT = "InputPerturbation"
TEST_MODEL = "ModelPerturbation"
TEST_IDS = (TEST_INPUT, TEST_MODEL)
# Report keys for the two tests, in canonical order.
TEST_KEYS = {TEST_INPUT: "IPT", TEST_MODEL: "MPT"}

SEVERITY_MINOR = "Minor"
SEVERITY_DISRUPTIVE = "Disruptive"
SEVERITY_IDS = (SEVERITY_MINOR, SEVERITY_DISRUPTIVE)


@dataclass(frozen=True)
class PerturbationSpec:
    """One perturbation condition: which test, how hard, and its draw seed.

    Input specs take an additive-noise interval (low, high); model specs take
    the mean and std of the multiplicative weight noise. k is the number of
    repetitions per condition and iterations the number of independent
    meta-evaluation repeats.
    """

    test: str
    severity: str
    low: float | None = None
    high: float | None = None
    mean: float | None = None
    std: float | None = None
    k: int = 5
    iterations: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.test not in TEST_IDS:
            raise ConfigError(f"unknown perturbation test {self.test!r}; expected one of {TEST_IDS}")
        if self.severity not in SEVERITY_IDS:
            raise ConfigError(f"unknown severity {self.severity!r}; expected one of {SEVERITY_IDS}")
        if self.test == TEST_INPUT:
            if self.low is None or self.high is None:
                raise ConfigError("input perturbation needs low and high")
            if self.mean is not None or self.std is not None:
                raise ConfigError("mean/std apply to model perturbation only")
            if self.low > self.high:
                raise ConfigError(f"low {self.low} exceeds high {self.high}")
        else:
            if self.mean is None or self.std is None:
                raise ConfigError("model perturbation needs mean and std")
            if self.low is not None or self.high is not None:
                raise ConfigError("low/high apply to input perturbation only")
            if self.std < 0:
                raise ConfigError("std must be non-negative")
        if self.k < 2:
            raise ConfigError("k must be at least 2")
        if self.iterations < 1:
            raise ConfigError("iterations must be at least 1")

    @property
    def magnitude(self) -> float:
        """Severity scale used to check Minor < Disruptive."""
        if self.test == TEST_INPUT:
            return max(abs(self.low), abs(self.high))
        return float(self.std)

    def as_dict(self) -> dict:
        out = {"test": self.test, "severity": self.severity, "k": self.k,
               "iterations": self.iterations, "seed": self.seed}
        if self.test == TEST_INPUT:
            out.update(low=self.low, high=self.high)
        else:
            out.update(mean=self.mean, std=self.std)
        return out


def default_specs(seed: int = 0, k: int = 5, iterations: int = 3) -> tuple:
    """The stock two-tests-by-two-severities grid on unit-scaled data."""
    common = {"k": k, "iterations": iterations, "seed": seed}
    return (
        PerturbationSpec(TEST_INPUT, SEVERITY_MINOR, low=-0.01, high=0.01, **common),
        PerturbationSpec(TEST_INPUT, SEVERITY_DISRUPTIVE, low=-2.0, high=2.0, **common),
        PerturbationSpec(TEST_MODEL, SEVERITY_MINOR, mean=1.0, std=0.005, **common),
        PerturbationSpec(TEST_MODEL, SEVERITY_DISRUPTIVE, mean=1.0, std=2.0, **common),
    )


def perturb_inputs(dataset: Dataset, spec: PerturbationSpec, k: int) -> Dataset:
    """Additive elementwise uniform noise on every input; deterministic per (seed, k)."""
    if spec.test != TEST_INPUT:
        raise ConfigError(f"perturb_inputs needs an {TEST_INPUT} spec, got {spec.test}")
    rng = derive_rng(spec.seed, "perturb_input", spec.severity, k)
    delta = rng.uniform(spec.low, spec.high, size=dataset.inputs.shape).astype(np.float32)
    meta = dict(dataset.meta, perturbation=dict(spec.as_dict(), rep=k))
    return Dataset(dataset.inputs + delta, dataset.labels, dataset.split,
                   dataset.num_classes, meta)


def perturb_model(model: Model, spec: PerturbationSpec, k: int) -> Model:
    """Multiply every weight and bias elementwise by nu ~ N(mean, std^2)."""
    if spec.test != TEST_MODEL:
        raise ConfigError(f"perturb_model needs a {TEST_MODEL} spec, got {spec.test}")
    rng = derive_rng(spec.seed, "perturb_model", spec.severity, k)
    out = model.copy()
    for layer in out.param_layers:
        nu_w = rng.normal(spec.mean, spec.std, size=layer.w.shape)
        nu_b = rng.normal(spec.mean, spec.std, size=layer.b.shape)
        layer.w = (layer.w * nu_w).astype(np.float32)
        layer.b = (layer.b * nu_b).astype(np.float32)
    out.metadata = dict(out.metadata, perturbation=dict(spec.as_dict(), rep=k))
    return out


@dataclass(frozen=True)
class MetaEvalVector:
    """The four consistency components for one perturbation test."""

    iac_nr: float
    iac_ar: float
    iec_nr: float
    iec_ar: float

    def __post_init__(self):
        for name in ("iac_nr", "iac_ar", "iec_nr", "iec_ar"):
            v = getattr(self, name)
            if not (-1e-9 <= v <= 1.0 + 1e-9):
                raise ValueError(f"{name}={v} outside [0, 1]")

    @property
    def mc(self) -> float:
        return (self.iac_nr + self.iac_ar + self.iec_nr + self.iec_ar) / 4.0

    def as_dict(self) -> dict:
        return {"iac_nr": self.iac_nr, "iac_ar": self.iac_ar,
                "iec_nr": self.iec_nr, "iec_ar": self.iec_ar, "mc": self.mc}


@dataclass
class MCScore:
    """Meta-consistency verdict for one estimator over one method set."""

    value: float                       # mean MC over tests and iterations
    mc_std: float                      # std of per-iteration MC, ddof=0
    per_test: dict                     # report key -> MetaEvalVector (iteration means)
    per_iteration: list                # MC per iteration
    metric: str
    method_set: tuple
    method_set_id: str
    flags: list
    mpt_accuracy: dict
    config_echo: dict

    def to_json_dict(self) -> dict:
        return {
            "metric": self.metric,
            "method_set": list(self.method_set),
            "method_set_id": self.method_set_id,
            "per_test": {key: vec.as_dict() for key, vec in self.per_test.items()},
            "mc_mean": self.value,
            "mc_std": self.mc_std,
            "per_iteration_mc": list(self.per_iteration),
            "flags": list(self.flags),
            "mpt_accuracy": self.mpt_accuracy,
            "config_echo": self.config_echo,
        }


_COMPONENT_DEFINITIONS = {
    "iac_nr": "mean Wilcoxon signed-rank p, unperturbed vs Minor per-sample scores",
    "iac_ar": "mean (1 - Wilcoxon p), unperturbed vs Disruptive per-sample scores",
    "iec_nr": "fraction of method-pair orderings preserved under Minor, mean over k",
    "iec_ar": "fraction of (method, k) cells strictly worse under Disruptive",
    "severity_defaults": "input U(-0.01, 0.01) / U(-2, 2); weights N(1, 0.005^2) / N(1, 2^2)",
}


@dataclass
class MetricScorer:
    """Adapter turning a metric run into per-sample scores for meta-evaluation.

    Calling it with (model, dataset, method, seed) runs the named metric on
    the first n_test test samples and returns one score per sample: the
    fully-randomised-stage similarity for the similarity-based metrics, the
    relative complexity rise for the entropy-based one (NaN where the original
    attribution was degenerate).
    """

    metric: str = "MPRT"
    rho: str = "SSIM"
    n_test: int | None = 32
    smprt_n: int = 10
    smprt_noise: float = 0.2
    xi_bins: int = 100
    reinit: str = "ScaledNormal"
    method_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.metric not in ("MPRT", "sMPRT", "eMPRT"):
            raise ConfigError(f"unknown metric {self.metric!r}")

    @property
    def higher_is_better(self) -> bool:
        # A rise in complexity signals sensitivity; a high similarity to the
        # randomised model's explanation signals insensitivity.
        return self.metric == "eMPRT"

    def config_echo(self) -> dict:
        out = {"metric": self.metric, "n_test": self.n_test}
        if self.metric == "eMPRT":
            out.update(xi_bins=self.xi_bins, reinit=self.reinit)
        else:
            out.update(rho=self.rho)
        if self.metric == "sMPRT":
            out.update(smprt_n=self.smprt_n, smprt_noise=self.smprt_noise)
        if self.method_params:
            out["method_params"] = self.method_params
        return out

    def __call__(self, model: Model, dataset: Dataset, method: str, seed: int) -> np.ndarray:
        ds = subset(dataset, n_train=0, n_test=self.n_test)
        cfg = MethodConfig(method, **self.method_params.get(method, {}))
        # Perturbed models legitimately produce degenerate attributions, so
        # per-sample failures surface as NaN here rather than aborting a cell.
        if self.metric == "eMPRT":
            try:
                res = run_emprt(model, ds, cfg, xi_bins=self.xi_bins, seed=seed,
                                reinit=self.reinit)
            except DegenerateComplexityError:
                return np.full(len(ds.test_inputs), np.nan)
            return res.scores
        plan = RandomisationPlan(order=ORDER_FULL_ONLY, reinit=self.reinit, seed=seed)
        if self.metric == "sMPRT":
            res = run_smprt(model, ds, cfg, plan, rho=self.rho, n=self.smprt_n,
                            noise_level=self.smprt_noise, seed=seed, zero_maps="nan")
        else:
            res = run_mprt(model, ds, cfg, plan, rho=self.rho, seed=seed, zero_maps="nan")
        return res.scores[-1]


def _paired_p(a: np.ndarray, b: np.ndarray):
    """Wilcoxon p over the finite pairs; (1.0, 0) when nothing comparable."""
    mask = np.isfinite(a) & np.isfinite(b)
    if not mask.any():
        return 1.0, 0
    return wilcoxon_signed_rank_p(a[mask], b[mask]), int(mask.sum())


def _aggregate(scores: np.ndarray) -> float:
    finite = scores[np.isfinite(scores)]
    return float(finite.mean()) if len(finite) else float("nan")


def _ordering_preserved(ref: dict, agg: dict, pairs: list) -> float:
    kept = 0
    for a, b in pairs:
        da, db = ref[a] - ref[b], agg[a] - agg[b]
        if np.isnan(da) or np.isnan(db):
            continue
        if np.sign(da) == np.sign(db):
            kept += 1
    return kept / len(pairs)


def _group_specs(specs) -> dict:
    by_test = {}
    for spec in specs:
        by_test.setdefault(spec.test, {})[spec.severity] = spec
    for test, severities in by_test.items():
        missing = [s for s in SEVERITY_IDS if s not in severities]
        if missing:
            raise ConfigError(f"{test} is missing severities: {missing}")
        lo = severities[SEVERITY_MINOR].magnitude
        hi = severities[SEVERITY_DISRUPTIVE].magnitude
        if not lo < hi:
            raise ConfigError(
                f"{test}: Minor magnitude {lo} must be strictly below Disruptive {hi}")
    return by_test


def _consensus(specs, attr: str, override) -> int:
    if override is not None:
        return int(override)
    values = {getattr(s, attr) for s in specs}
    if len(values) != 1:
        raise ConfigError(f"specs disagree on {attr}: {sorted(values)}; pass it explicitly")
    return values.pop()


def meta_evaluate(metric, methods, model: Model, dataset: Dataset, specs=None,
                  K: int | None = None, iterations: int | None = None, seed: int = 0,
                  method_set_id: str | None = None) -> MCScore:
    """Score one quality estimator's consistency under controlled perturbations.

    metric is a scorer callable (model, dataset, method, seed) -> per-sample
    scores with a boolean higher_is_better attribute; MetricScorer adapts the
    bundled metrics. Deterministic given (seed, K, iterations) and the specs'
    own seeds. Returns an MCScore carrying the per-test component vectors,
    the iteration mean/std, accuracy gate results and the full config echo.
    """
    methods = tuple(dict.fromkeys(methods))
    if len(methods) < 2:
        raise ConfigError("meta-evaluation requires at least 2 methods")
    if not hasattr(metric, "higher_is_better"):
        raise ConfigError("metric scorer must expose higher_is_better")
    hib = bool(metric.higher_is_better)
    if specs is None:
        specs = default_specs(seed)
    by_test = _group_specs(specs)
    tests = [t for t in TEST_IDS if t in by_test]
    K = _consensus(specs, "k", K)
    iterations = _consensus(specs, "iterations", iterations)
    if K < 2:
        raise ConfigError("K must be at least 2")
    if iterations < 1:
        raise ConfigError("iterations must be at least 1")
    pairs = [(methods[i], methods[j]) for i in range(len(methods))
             for j in range(i + 1, len(methods))]

    test_x, test_y = dataset.test_inputs, dataset.test_labels
    chance = 1.0 / dataset.num_classes
    orig_acc = accuracy(model, test_x, test_y) if TEST_MODEL in by_test else None

    flags: list = []
    mpt_acc: dict = {}
    if TEST_MODEL in by_test:
        mpt_acc = {"orig": orig_acc, "chance": chance,
                   SEVERITY_MINOR: [], SEVERITY_DISRUPTIVE: []}

    per_iter_vectors = {test: [] for test in tests}
    for it in range(iterations):
        base = {m: np.asarray(metric(model, dataset, m, derive_seed(seed, "base", it, m)),
                              dtype=np.float64)
                for m in methods}
        base_agg = {m: _aggregate(base[m]) for m in methods}
        for m in methods:
            finite = base[m][np.isfinite(base[m])]
            if len(finite) == 0 or np.ptp(finite) == 0.0:
                flags.append(f"degenerate-scores:base:{m}:iter{it}")

        for test in tests:
            cell_scores = {}
            for severity in SEVERITY_IDS:
                spec = by_test[test][severity]
                for k in range(K):
                    rep = it * K + k
                    if test == TEST_INPUT:
                        p_model, p_data = model, perturb_inputs(dataset, spec, rep)
                    else:
                        p_model, p_data = perturb_model(model, spec, rep), dataset
                        acc_p = accuracy(p_model, test_x, test_y)
                        mpt_acc[severity].append(round(acc_p, 6))
                        if severity == SEVERITY_MINOR and abs(acc_p - orig_acc) > 0.10:
                            msg = (f"Minor model perturbation moved accuracy by "
                                   f"{abs(acc_p - orig_acc):.3f} (iter {it}, rep {k})")
                            warnings.warn(msg)
                            flags.append(f"minor-disrupts-accuracy:iter{it}:k{k}")
                        if severity == SEVERITY_DISRUPTIVE and acc_p > chance + 0.10:
                            msg = (f"Disruptive model perturbation left accuracy at "
                                   f"{acc_p:.3f} > chance + 0.10 (iter {it}, rep {k})")
                            warnings.warn(msg)
                            flags.append(f"disruptive-keeps-accuracy:iter{it}:k{k}")
                    for m in methods:
                        cell_seed = derive_seed(seed, "cell", test, severity, it, k, m)
                        cell_scores[(severity, m, k)] = np.asarray(
                            metric(p_model, p_data, m, cell_seed), dtype=np.float64)

            p_minor, p_dis = [], []
            worse = []
            order_kept = []
            for k in range(K):
                agg_minor = {}
                for m in methods:
                    s_min = cell_scores[(SEVERITY_MINOR, m, k)]
                    s_dis = cell_scores[(SEVERITY_DISRUPTIVE, m, k)]
                    p, n_valid = _paired_p(base[m], s_min)
                    if n_valid == 0:
                        flags.append(f"degenerate-scores:{TEST_KEYS[test]}:{m}:iter{it}:k{k}")
                    p_minor.append(p)
                    p_dis.append(_paired_p(base[m], s_dis)[0])
                    agg_minor[m] = _aggregate(s_min)
                    agg_dis = _aggregate(s_dis)
                    if np.isnan(agg_dis) or np.isnan(base_agg[m]):
                        worse.append(0.0)
                        flags.append(f"degenerate-aggregate:{TEST_KEYS[test]}:{m}:iter{it}:k{k}")
                    else:
                        degraded = agg_dis < base_agg[m] if hib else agg_dis > base_agg[m]
                        worse.append(1.0 if degraded else 0.0)
                order_kept.append(_ordering_preserved(base_agg, agg_minor, pairs))

            vec = MetaEvalVector(
                iac_nr=float(np.mean(p_minor)),
                iac_ar=float(np.mean([1.0 - p for p in p_dis])),
                iec_nr=float(np.mean(order_kept)),
                iec_ar=float(np.mean(worse)),
            )
            per_iter_vectors[test].append(vec)

    per_test = {}
    for test in tests:
        vecs = per_iter_vectors[test]
        per_test[TEST_KEYS[test]] = MetaEvalVector(
            iac_nr=float(np.mean([v.iac_nr for v in vecs])),
            iac_ar=float(np.mean([v.iac_ar for v in vecs])),
            iec_nr=float(np.mean([v.iec_nr for v in vecs])),
            iec_ar=float(np.mean([v.iec_ar for v in vecs])),
        )
    per_iter_mc = [float(np.mean([per_iter_vectors[t][it].mc for t in tests]))
                   for it in range(iterations)]
    metric_name = getattr(metric, "metric", type(metric).__name__)
    echo = {
        "K": K, "iterations": iterations, "seed": seed,
        "methods": list(methods),
        "higher_is_better": hib,
        "specs": [by_test[t][s].as_dict() for t in tests for s in SEVERITY_IDS],
        "definitions": dict(_COMPONENT_DEFINITIONS),
    }
    scorer_echo = getattr(metric, "config_echo", None)
    if callable(scorer_echo):
        echo["scorer"] = scorer_echo()
    return MCScore(
        value=float(np.mean(per_iter_mc)),
        mc_std=float(np.std(per_iter_mc, ddof=0)),
        per_test=per_test,
        per_iteration=per_iter_mc,
        metric=metric_name,
        method_set=methods,
        method_set_id=method_set_id or "+".join(methods),
        flags=flags,
        mpt_accuracy=mpt_acc,
        config_echo=echo,
    )


MC_CSV_HEADER = ["metric", "method_set", "test", "iac_nr", "iac_ar", "iec_nr",
                 "iec_ar", "mc", "mc_mean", "mc_std", "seed"]


def write_mc_csv(score: MCScore, path: str, config_hash: str = "") -> None:
    """Flatten one MCScore to CSV, one row per perturbation test."""
    seed = score.config_echo["seed"]
    rows = []
    for key in sorted(score.per_test):
        vec = score.per_test[key]
        rows.append([score.metric, score.method_set_id, key, vec.iac_nr, vec.iac_ar,
                     vec.iec_nr, vec.iec_ar, vec.mc, score.value, score.mc_std, seed])
    write_rows(path, MC_CSV_HEADER, rows, [f"config={config_hash} seed={seed}"])
