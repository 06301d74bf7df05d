"""Complexity measures: histogram entropy of attributions, Shannon entropy
of model outputs.

Histogram entropy uses natural log over B equidistant, data-driven bins
spanning [min, max] of the map, so it is invariant under positive affine
transforms of the values. Model output entropy is base-2, computed on
post-softmax probabilities.
"""

from __future__ import annotations

import numpy as np


def histogram_entropy(values, bins: int = 100) -> float:
    """-sum p ln p over occupied bins; 0 for a constant map."""
    if hasattr(values, "values"):
        values = values.values
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValueError("cannot compute entropy of an empty attribution")
    if bins < 2:
        raise ValueError("bin count must be >= 2")
    lo = v.min()
    hi = v.max()
    if lo == hi:
        return 0.0
    counts, _ = np.histogram(v, bins=bins, range=(lo, hi))
    p = counts[counts > 0] / v.size
    return float(-(p * np.log(p)).sum())


def model_output_entropy(probabilities) -> float:
    """Base-2 Shannon entropy of a post-softmax distribution."""
    p = np.asarray(probabilities, dtype=np.float64).ravel()
    if abs(p.sum() - 1.0) > 1e-4 or p.min() < -1e-4:
        raise ValueError(f"input is off the probability simplex (sum {p.sum():.6f}, min {p.min():.6f})")
    p = np.clip(p, 0.0, None)
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum())
