"""End-to-end metric runners over randomisation stages."""

import numpy as np
import pytest

import mprtbench.metrics.runners as runners
from mprtbench.attribution.methods import MethodConfig
from mprtbench.data import subset
from mprtbench.errors import DegenerateComplexityError
from mprtbench.metrics.runners import (curve_auc, emprt_complexity_curve,
                                       rank_methods, run_emprt, run_mprt, run_smprt)
from mprtbench.randomisation import RandomisationPlan


@pytest.fixture(scope="module")
def eval_ds(tiny_dataset):
    return subset(tiny_dataset, n_train=0, n_test=6)


def _mprt(model, ds, method="Gradient", **kw):
    return run_mprt(model, ds, MethodConfig(method).resolved(),
                    RandomisationPlan(seed=0), seed=0, **kw)


def test_mprt_shapes_and_orig_stage(tiny_model, eval_ds):
    res = _mprt(tiny_model, eval_ds)
    n_stages = len(res.stage_labels)
    assert res.stage_labels[0] == "orig"
    assert res.stage_labels[-1] == "final"
    assert res.scores.shape == (n_stages, 6)
    # Stage zero compares the original model with itself.
    assert np.allclose(res.scores[0], 1.0, atol=1e-9)
    assert len(res.estimates) == 6
    assert [e.sample_id for e in res.estimates] == list(range(6))
    assert all(e.metric == "MPRT" and e.method == "Gradient" for e in res.estimates)
    assert np.allclose([e.value for e in res.estimates], res.scores[-1], atol=1e-12)


def test_mprt_curve_mirrors_scores(tiny_model, eval_ds):
    res = _mprt(tiny_model, eval_ds)
    assert res.curve.metric == "MPRT"
    assert res.curve.method == "Gradient"
    labels = [s[0] for s in res.curve.stages]
    assert labels == list(res.stage_labels)
    for (label, mean, std, n), row in zip(res.curve.stages, res.scores):
        assert n == 6
        assert np.isclose(mean, row.mean(), atol=1e-9)
        assert np.isclose(std, row.std(), atol=1e-9)


def test_mprt_deterministic(tiny_model, eval_ds):
    a = _mprt(tiny_model, eval_ds)
    b = _mprt(tiny_model, eval_ds)
    assert np.array_equal(a.scores, b.scores)


def test_mprt_randomisation_reduces_similarity(tiny_model, eval_ds):
    res = _mprt(tiny_model, eval_ds)
    assert np.nanmean(res.scores[-1]) < np.nanmean(res.scores[0]) - 0.05


def test_smprt_single_clean_sample_equals_mprt(tiny_model, eval_ds):
    plain = _mprt(tiny_model, eval_ds, method="Saliency")
    smooth = run_smprt(tiny_model, eval_ds, MethodConfig("Saliency").resolved(),
                       RandomisationPlan(seed=0), n=1, noise_level=0.0, seed=0)
    assert np.allclose(plain.scores, smooth.scores, atol=1e-6, equal_nan=True)


def test_smprt_noise_draw_shared_across_stages(tiny_model, eval_ds):
    # Scores at the orig stage stay exactly 1: both sides of the comparison
    # see the same perturbed inputs, so the maps are identical.
    res = run_smprt(tiny_model, eval_ds, MethodConfig("Gradient").resolved(),
                    RandomisationPlan(seed=0), n=3, noise_level=0.2, seed=0)
    assert np.allclose(res.scores[0], 1.0, atol=1e-9)


def test_emprt_quotient_definition(tiny_model, eval_ds):
    res = run_emprt(tiny_model, eval_ds, MethodConfig("Gradient").resolved(), seed=0)
    assert res.scores.shape == (6,)
    expected = (res.xi_final - res.xi_orig) / res.xi_orig
    assert np.allclose(res.scores, expected, atol=1e-12, equal_nan=True)
    assert np.allclose([e.value for e in res.estimates], expected, atol=1e-12)
    assert res.degenerate_count == 0
    assert np.isclose(res.aggregate, expected.mean(), atol=1e-12)


def test_emprt_deterministic(tiny_model, eval_ds):
    cfg = MethodConfig("RandomBaseline").resolved()
    a = run_emprt(tiny_model, eval_ds, cfg, seed=3)
    b = run_emprt(tiny_model, eval_ds, cfg, seed=3)
    assert np.array_equal(a.scores, b.scores)


def test_emprt_degenerate_maps_become_nan(tiny_model, eval_ds, monkeypatch):
    real = runners.explain_batch
    calls = {"i": 0}

    def flatten_first(model, xs, classes, cfg, rng_seed):
        maps = real(model, xs, classes, cfg, rng_seed)
        calls["i"] += 1
        if calls["i"] == 1:  # original-model pass only
            maps = maps.copy()
            maps[0] = 0.0    # constant map -> zero entropy for sample 0
        return maps

    monkeypatch.setattr(runners, "explain_batch", flatten_first)
    res = run_emprt(tiny_model, eval_ds, MethodConfig("Gradient").resolved(), seed=0)
    assert res.degenerate_count == 1
    assert np.isnan(res.scores[0])
    assert np.all(np.isfinite(res.scores[1:]))
    assert len(res.estimates) == 5  # valid samples only


def test_emprt_all_degenerate_raises(tiny_model, eval_ds, monkeypatch):
    real = runners.explain_batch
    calls = {"i": 0}

    def flatten_orig(model, xs, classes, cfg, rng_seed):
        maps = real(model, xs, classes, cfg, rng_seed)
        calls["i"] += 1
        if calls["i"] == 1:
            maps = np.zeros_like(maps)
        return maps

    monkeypatch.setattr(runners, "explain_batch", flatten_orig)
    with pytest.raises(DegenerateComplexityError):
        run_emprt(tiny_model, eval_ds, MethodConfig("Gradient").resolved(), seed=0)


def test_emprt_complexity_curve_pair(tiny_model, eval_ds):
    xi_curve, ent_curve = emprt_complexity_curve(
        tiny_model, eval_ds, MethodConfig("Gradient").resolved(),
        RandomisationPlan(seed=0), seed=0)
    assert xi_curve.metric == "eMPRT"
    assert ent_curve.metric == "ModelEntropy"
    labels = [s[0] for s in xi_curve.stages]
    assert labels[0] == "orig" and labels[-1] == "final"
    assert [s[0] for s in ent_curve.stages] == labels


def test_random_baseline_redraw_keeps_estimates_near_zero(tiny_model, eval_ds):
    # A fresh random map at every stage keeps complexity flat, which is the
    # point of redrawing the baseline instead of comparing one draw twice.
    cfg = MethodConfig("RandomBaseline").resolved()
    res = run_emprt(tiny_model, eval_ds, cfg, seed=0, redraw_random_baseline=True)
    assert abs(float(np.nanmean(res.scores))) < 0.05
    frozen = run_emprt(tiny_model, eval_ds, cfg, seed=0, redraw_random_baseline=False)
    assert np.allclose(frozen.scores, 0.0, atol=1e-12)


def test_zero_maps_policy(tiny_model, eval_ds, monkeypatch):
    real = runners.explain_batch

    def zero_final(model, xs, classes, cfg, rng_seed):
        maps = real(model, xs, classes, cfg, rng_seed)
        maps = maps.copy()
        maps[0] = 0.0
        return maps

    monkeypatch.setattr(runners, "explain_batch", zero_final)
    with pytest.raises(Exception):
        _mprt(tiny_model, eval_ds, zero_maps="error")
    res = _mprt(tiny_model, eval_ds, zero_maps="nan")
    assert np.isnan(res.scores[-1][0])


def test_curve_auc(tiny_model, eval_ds):
    res = _mprt(tiny_model, eval_ds)
    auc = curve_auc(res.curve)
    means = [s[1] for s in res.curve.stages]
    assert np.isclose(auc, np.trapezoid(means, dx=1.0), atol=1e-9)


def test_rank_methods_orientation_and_ties():
    rows = rank_methods({"A": 0.2, "B": 0.8, "C": 0.5}, "MPRT")
    assert [(r.rank, r.method) for r in rows] == [(1, "A"), (2, "C"), (3, "B")]
    assert not any(r.tied for r in rows)
    rows = rank_methods({"A": 0.2, "B": 0.8, "C": 0.5}, "eMPRT")
    assert [(r.rank, r.method) for r in rows] == [(1, "B"), (2, "C"), (3, "A")]
    rows = rank_methods({"A": 0.5, "B": 0.5}, "MPRT")
    assert all(r.tied for r in rows)
    with pytest.raises(ValueError):
        rank_methods({"A": 0.5}, "MPRT")
