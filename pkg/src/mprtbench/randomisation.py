"""Layer randomisation: controlled re-initialisation of model parameters.

A plan walks the parameterised layers top-down (output first), bottom-up
(input first) or jumps straight to the fully randomised state. Randomisation
is cumulative: once a layer is re-drawn it stays re-drawn for the rest of the
walk. Draws are keyed by (plan seed, layer index), never by stage position,
so both walk orders and the full-only plan land on bit-identical final
parameters for the same seed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .engine.layers import kaiming_uniform
from .engine.model import Model, accuracy
from .errors import ConfigError
from .seeding import derive_rng

ORDER_TOP_DOWN = "TopDown"
ORDER_BOTTOM_UP = "BottomUp"
ORDER_FULL_ONLY = "FullOnly"
ORDERS = (ORDER_TOP_DOWN, ORDER_BOTTOM_UP, ORDER_FULL_ONLY)

REINIT_SCALED_NORMAL = "ScaledNormal"
REINIT_KAIMING = "KaimingUniform"
REINIT_RULES = (REINIT_SCALED_NORMAL, REINIT_KAIMING)


@dataclass
class RandomisationPlan:
    order: str = ORDER_TOP_DOWN
    cumulative: bool = True
    reinit: str = REINIT_SCALED_NORMAL
    seed: int = 0

    def __post_init__(self):
        if self.order not in ORDERS:
            raise ConfigError(f"unknown randomisation order {self.order!r}; expected one of {ORDERS}")
        if self.reinit not in REINIT_RULES:
            raise ConfigError(f"unknown reinit rule {self.reinit!r}; expected one of {REINIT_RULES}")
        if not self.cumulative:
            raise ConfigError("independent (non-cumulative) per-layer randomisation is not supported")


@dataclass
class ModelState:
    """One stage of a randomisation walk; owns an independent parameter copy."""

    model: Model
    randomised_layers: frozenset
    stage_label: str


def reinit_params(weights: np.ndarray, rule: str, rng: np.random.Generator,
                  fan_in: int | None = None) -> np.ndarray:
    """Fresh weight draw: N(0, std(weights)) or Kaiming-uniform fan-in.

    A zero-variance original cannot seed the scaled-normal rule, so it falls
    back to Kaiming-uniform (requires fan_in) with a warning.
    """
    if rule == REINIT_SCALED_NORMAL:
        std = float(np.asarray(weights, dtype=np.float64).std())
        if std > 0:
            return rng.normal(0.0, std, size=weights.shape).astype(np.float32)
        warnings.warn("zero-variance weights under ScaledNormal; falling back to KaimingUniform")
        rule = REINIT_KAIMING
    if rule == REINIT_KAIMING:
        if fan_in is None:
            fan_in = int(np.asarray(weights).shape[-1]) if np.asarray(weights).ndim else 1
        return kaiming_uniform(weights.shape, fan_in, rng)
    raise ConfigError(f"unknown reinit rule {rule!r}")


def _reinit_bias(bias: np.ndarray, rule: str, rng: np.random.Generator) -> np.ndarray:
    if rule == REINIT_SCALED_NORMAL:
        std = float(np.asarray(bias, dtype=np.float64).std())
        if std > 0:
            return rng.normal(0.0, std, size=bias.shape).astype(np.float32)
    return np.zeros_like(bias)


def _randomise_layer(layer, plan: RandomisationPlan) -> None:
    # One rng per (seed, layer): stage order does not influence the draw.
    rng = derive_rng(plan.seed, "reinit", layer.layer_index)
    layer.w = reinit_params(layer.w, plan.reinit, rng, fan_in=layer.fan_in)
    layer.b = _reinit_bias(layer.b, plan.reinit, rng)


def randomise_layers(model: Model, plan: RandomisationPlan) -> list[ModelState]:
    """Walk the plan; first state is always the untouched original."""
    param_layers = model.param_layers
    if not param_layers:
        raise ConfigError("model has no parameterised layers to randomise")
    states = [ModelState(model.copy(), frozenset(), "orig")]
    if plan.order == ORDER_FULL_ONLY:
        work = model.copy()
        for layer in work.param_layers:
            _randomise_layer(layer, plan)
        states.append(ModelState(work, frozenset(l.layer_index for l in param_layers), "final"))
        return states
    visit = param_layers if plan.order == ORDER_BOTTOM_UP else list(reversed(param_layers))
    work = model.copy()
    done: set = set()
    for i, target in enumerate(visit):
        layer = work.layer_by_index(target.layer_index)
        _randomise_layer(layer, plan)
        done.add(target.layer_index)
        label = "final" if i == len(visit) - 1 else target.name
        states.append(ModelState(work.copy(), frozenset(done), label))
    return states


def randomise_single_layer(model: Model, layer_index: int, plan: RandomisationPlan) -> Model:
    """Copy of the model with exactly one parameterised layer re-drawn."""
    work = model.copy()
    layer = work.layer_by_index(layer_index)
    if not layer.has_params:
        raise ConfigError(f"layer {layer_index} ({layer.name}) has no parameters")
    _randomise_layer(layer, plan)
    return work


def accuracy_under_randomisation(states: list[ModelState], dataset: Dataset) -> list[tuple[str, float]]:
    """Accuracy per stage, evaluated on the dataset's test split (all samples
    if the dataset has no test split)."""
    xs = dataset.test_inputs
    ys = dataset.test_labels
    if len(xs) == 0:
        xs, ys = dataset.inputs, dataset.labels
    if len(xs) == 0:
        raise ValueError("dataset is empty")
    return [(s.stage_label, accuracy(s.model, xs, ys)) for s in states]


@dataclass
class BinChangeResult:
    """Mean absolute change of intermediate relevance, bucketed by magnitude."""

    rows: list              # (bin_index, mean_abs_change) for occupied bins only
    edges: np.ndarray       # 101 edges spanning [0, max|e_l|]
    layer_index: int
    randomised_layer: int
    n_samples: int
    meta: dict = field(default_factory=dict)


def bin_change_analysis(model: Model, layer_index: int, explainer_cfg, dataset: Dataset,
                        plan: RandomisationPlan, bins: int = 100) -> BinChangeResult:
    """Compare intermediate relevance before/after one-layer randomisation.

    The intermediate explanation at a layer is its output relevance recorded
    during propagation, so the explainer must be one of the relevance rules.
    TopDown randomises only the last parameterised layer, BottomUp only the
    first; original |e_l| values are sorted into `bins` equidistant magnitude
    bins over [0, max|e_l|] and the mean |e_hat_l - e_l| is reported per
    occupied bin (empty bins are omitted, not zero).
    """
    from .attribution.lrp import RULE_EPSILON, RULE_ZPLUS, lrp_relevance_batch
    from .engine.model import predict_batch

    cfg = explainer_cfg.resolved()
    rule = {"LRP_Epsilon": RULE_EPSILON, "LRP_ZPlus": RULE_ZPLUS}.get(cfg.method)
    if rule is None:
        raise ConfigError(
            f"bin-change analysis needs a relevance method with intermediate maps; got {cfg.method}")
    layer = model.layer_by_index(layer_index)
    if layer.kind == "Softmax":
        raise ConfigError("no intermediate relevance is defined at the Softmax layer")
    if plan.order == ORDER_FULL_ONLY:
        raise ConfigError("bin-change analysis needs a TopDown or BottomUp plan")

    xs = dataset.test_inputs
    if len(xs) == 0:
        xs = dataset.inputs
    classes = predict_batch(model, xs)

    param_layers = model.param_layers
    target = param_layers[-1] if plan.order == ORDER_TOP_DOWN else param_layers[0]
    randomised = randomise_single_layer(model, target.layer_index, plan)

    _, rec_orig = lrp_relevance_batch(model, xs, classes, rule, cfg.epsilon, record=True)
    _, rec_rand = lrp_relevance_batch(randomised, xs, classes, rule, cfg.epsilon, record=True)
    e_l = rec_orig[layer_index].ravel().astype(np.float64)
    e_hat = rec_rand[layer_index].ravel().astype(np.float64)

    mag = np.abs(e_l)
    top = float(mag.max())
    edges = np.linspace(0.0, top, bins + 1)
    if top == 0.0:
        idx = np.zeros(len(mag), dtype=np.int64)
    else:
        idx = np.minimum((mag / top * bins).astype(np.int64), bins - 1)
    change = np.abs(e_hat - e_l)
    rows = []
    for b in range(bins):
        mask = idx == b
        if mask.any():
            rows.append((b, float(change[mask].mean())))
    return BinChangeResult(rows=rows, edges=edges, layer_index=layer_index,
                           randomised_layer=target.layer_index, n_samples=len(xs),
                           meta={"order": plan.order, "method": cfg.method, "seed": plan.seed})
