"""Synthetic scorers with known meta-consistency outcomes.

The oracle estimator detects perturbations directly instead of explaining
anything: scores are constant per method, dropped by a fixed amount whenever
the input batch or the weights have visibly moved from the reference state.
Score vectors are long enough (128) that a uniform drop pushes the signed-rank
p-value below the double rounding step at 1.0, making 1 - p exactly one.
"""

import numpy as np

_N_SCORES = 128
_INPUT_TOL = 0.1     # Minor input jitter is +-0.01; Disruptive is +-2
_WEIGHT_TOL = 0.5    # median |nu - 1| is ~0.003 for Minor, ~1.35 for Disruptive


class OracleEstimator:
    """Optimal by construction: unchanged under Minor, uniformly worse under
    Disruptive, with a stable method ordering."""

    higher_is_better = True
    metric = "Oracle"

    def __init__(self, model, dataset, methods):
        self._inputs = dataset.test_inputs.copy()
        self._weights = [l.w.copy() for l in model.param_layers]
        self._offset = {m: float(10 + i) for i, m in enumerate(methods)}

    def _disrupted(self, model, dataset):
        xs = dataset.test_inputs
        if xs.shape == self._inputs.shape:
            if np.max(np.abs(xs - self._inputs)) > _INPUT_TOL:
                return True
        else:
            return True
        devs = []
        for ref, layer in zip(self._weights, model.param_layers):
            nz = np.abs(ref) > 1e-12
            devs.append(np.abs(layer.w[nz] / ref[nz] - 1.0))
        if np.median(np.concatenate(devs)) > _WEIGHT_TOL:
            return True
        return False

    def __call__(self, model, dataset, method, seed):
        base = self._offset[method]
        if self._disrupted(model, dataset):
            base -= 10.0
        # Fixed per-sample jitter keeps the vector non-constant (so the
        # degenerate-score guard stays quiet) without touching the paired
        # differences, which stay exactly 0 or exactly -10.
        return base + np.linspace(0.0, 1e-6, _N_SCORES)


class NoiseEstimator:
    """Seeded pure noise; carries no information about the perturbations."""

    higher_is_better = True
    metric = "Noise"

    def __call__(self, model, dataset, method, seed):
        rng = np.random.default_rng(seed)
        return rng.standard_normal(_N_SCORES)
