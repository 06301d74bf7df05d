"""Layer randomisation plans, stage sequences and the bin-change probe."""

import numpy as np
import pytest

from mprtbench.attribution.methods import MethodConfig
from mprtbench.data import generate_synthetic, subset
from mprtbench.engine.model import logits_batch
from mprtbench.errors import ConfigError
from mprtbench.randomisation import (ORDER_BOTTOM_UP, ORDER_FULL_ONLY, ORDER_TOP_DOWN,
                                     RandomisationPlan, accuracy_under_randomisation,
                                     bin_change_analysis, randomise_layers,
                                     randomise_single_layer, reinit_params)


def _param_names(model):
    return [l.name for l in model.param_layers]


def test_plan_validation():
    RandomisationPlan()
    with pytest.raises(ConfigError):
        RandomisationPlan(order="Sideways")
    with pytest.raises(ConfigError):
        RandomisationPlan(reinit="Zeros")
    with pytest.raises(ConfigError):
        RandomisationPlan(cumulative=False)


def test_top_down_stage_sequence(tiny_model):
    states = randomise_layers(tiny_model, RandomisationPlan(order=ORDER_TOP_DOWN, seed=0))
    names = _param_names(tiny_model)
    assert [s.stage_label for s in states] == ["orig"] + names[::-1][:-1] + ["final"]
    assert states[0].randomised_layers == frozenset()
    # Cumulative: each stage adds exactly one layer to the randomised set.
    for prev, cur in zip(states, states[1:]):
        added = cur.randomised_layers - prev.randomised_layers
        assert len(added) == 1
        assert prev.randomised_layers < cur.randomised_layers


def test_bottom_up_stage_sequence(tiny_model):
    states = randomise_layers(tiny_model, RandomisationPlan(order=ORDER_BOTTOM_UP, seed=0))
    names = _param_names(tiny_model)
    assert [s.stage_label for s in states] == ["orig"] + names[:-1] + ["final"]


def test_full_only_stage_sequence(tiny_model):
    states = randomise_layers(tiny_model, RandomisationPlan(order=ORDER_FULL_ONLY, seed=0))
    assert [s.stage_label for s in states] == ["orig", "final"]
    indices = {l.layer_index for l in tiny_model.param_layers}
    assert states[1].randomised_layers == frozenset(indices)


def test_original_model_untouched(tiny_model, tiny_eval):
    before = [l.w.copy() for l in tiny_model.param_layers]
    randomise_layers(tiny_model, RandomisationPlan(seed=3))
    for w0, layer in zip(before, tiny_model.param_layers):
        assert np.array_equal(w0, layer.w)


def test_each_stage_randomises_only_new_layer(tiny_model):
    states = randomise_layers(tiny_model, RandomisationPlan(order=ORDER_TOP_DOWN, seed=1))
    for prev, cur in zip(states, states[1:]):
        (new_index,) = cur.randomised_layers - prev.randomised_layers
        for lp, lc in zip(prev.model.param_layers, cur.model.param_layers):
            if lc.layer_index == new_index:
                assert not np.array_equal(lp.w, lc.w)
            else:
                assert np.array_equal(lp.w, lc.w)


def test_final_state_identical_across_orders(tiny_model):
    # Per-layer draws are keyed by layer index, so the fully randomised model
    # does not depend on the traversal order.
    finals = {}
    for order in (ORDER_TOP_DOWN, ORDER_BOTTOM_UP, ORDER_FULL_ONLY):
        states = randomise_layers(tiny_model, RandomisationPlan(order=order, seed=5))
        finals[order] = states[-1].model
    ref = finals[ORDER_TOP_DOWN]
    for other in (ORDER_BOTTOM_UP, ORDER_FULL_ONLY):
        for lr, lo in zip(ref.param_layers, finals[other].param_layers):
            assert np.array_equal(lr.w, lo.w)
            assert np.array_equal(lr.b, lo.b)


def test_seed_changes_draws(tiny_model):
    a = randomise_layers(tiny_model, RandomisationPlan(seed=0))[-1].model
    b = randomise_layers(tiny_model, RandomisationPlan(seed=1))[-1].model
    assert any(not np.array_equal(la.w, lb.w)
               for la, lb in zip(a.param_layers, b.param_layers))


def test_randomised_model_still_runs(tiny_model, tiny_eval):
    states = randomise_layers(tiny_model, RandomisationPlan(seed=0))
    logits = logits_batch(states[-1].model, tiny_eval.test_inputs)
    assert np.all(np.isfinite(logits))


def test_scaled_normal_preserves_scale(rng):
    w = rng.standard_normal((64, 64)).astype(np.float32) * 0.05
    out = reinit_params(w, "ScaledNormal", np.random.default_rng(0))
    assert out.shape == w.shape
    assert not np.array_equal(out, w)
    assert np.isclose(out.std(), w.std(), rtol=0.1)


def test_zero_variance_falls_back_to_kaiming():
    w = np.zeros((8, 8), dtype=np.float32)
    with pytest.warns(UserWarning):
        out = reinit_params(w, "ScaledNormal", np.random.default_rng(0), fan_in=8)
    assert out.std() > 0


def test_randomise_single_layer_rejects_paramless(tiny_model):
    relu_index = next(l.layer_index for l in tiny_model.layers if l.kind == "ReLU")
    with pytest.raises(ConfigError):
        randomise_single_layer(tiny_model, relu_index, RandomisationPlan())


def test_accuracy_under_randomisation_decays(tiny_model, tiny_dataset):
    states = randomise_layers(tiny_model, RandomisationPlan(order=ORDER_TOP_DOWN, seed=0))
    rows = accuracy_under_randomisation(states, tiny_dataset)
    assert [label for label, _ in rows] == [s.stage_label for s in states]
    accs = [acc for _, acc in rows]
    assert accs[0] > 0.25          # trained model beats chance
    assert min(accs[1:]) < accs[0]  # randomisation hurts somewhere


def test_bin_change_analysis(tiny_model, tiny_dataset):
    ds = subset(tiny_dataset, n_train=0, n_test=6)
    layer_index = tiny_model.param_layers[1].layer_index
    res = bin_change_analysis(tiny_model, layer_index,
                              MethodConfig("LRP_Epsilon").resolved(), ds,
                              RandomisationPlan(seed=0), bins=20)
    assert res.layer_index == layer_index
    assert res.n_samples == 6
    assert len(res.edges) == 21
    assert 0 < len(res.rows) <= 20
    seen = set()
    for bin_index, change in res.rows:
        assert 0 <= bin_index < 20
        assert bin_index not in seen  # occupied bins appear once
        seen.add(bin_index)
        assert change >= 0.0


def test_bin_change_rejects_non_lrp(tiny_model, tiny_dataset):
    ds = subset(tiny_dataset, n_train=0, n_test=4)
    idx = tiny_model.param_layers[1].layer_index
    with pytest.raises(ConfigError):
        bin_change_analysis(tiny_model, idx, MethodConfig("Gradient").resolved(),
                            ds, RandomisationPlan(seed=0))


def test_bin_change_rejects_full_only_plan(tiny_model, tiny_dataset):
    ds = subset(tiny_dataset, n_train=0, n_test=4)
    idx = tiny_model.param_layers[1].layer_index
    with pytest.raises(ConfigError):
        bin_change_analysis(tiny_model, idx, MethodConfig("LRP_Epsilon").resolved(),
                            ds, RandomisationPlan(order=ORDER_FULL_ONLY, seed=0))
