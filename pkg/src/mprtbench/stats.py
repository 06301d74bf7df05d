"""Rank and signed-rank statistics used by similarity metrics and meta-evaluation.

Hand-rolled so the package stays dependency-light; the test suite cross-checks
against scipy where available.
"""

from __future__ import annotations

import math

import numpy as np


def average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned the mean of their covered positions."""
    v = np.asarray(values, dtype=np.float64).ravel()
    order = np.argsort(v, kind="stable")
    sv = v[order]
    ranks = np.empty(len(v), dtype=np.float64)
    i = 0
    while i < len(v):
        j = i
        while j + 1 < len(v) and sv[j + 1] == sv[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def wilcoxon_signed_rank_p(a: np.ndarray, b: np.ndarray) -> float:
    """Two-sided Wilcoxon signed-rank p-value, normal approximation.

    Zero differences are dropped (the classic zero-handling rule); ties get a
    variance correction and the z statistic a 0.5 continuity correction. All
    differences zero means the distributions are indistinguishable here, so
    p = 1.0 by convention.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError("paired vectors must have equal length")
    d = a - b
    d = d[d != 0]
    n = len(d)
    if n == 0:
        return 1.0
    ranks = average_ranks(np.abs(d))
    w_pos = float(ranks[d > 0].sum())
    mn = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    _, counts = np.unique(np.abs(d), return_counts=True)
    var -= float(((counts ** 3 - counts).sum())) / 48.0
    if var <= 0:
        return 1.0
    correction = 0.5 * np.sign(w_pos - mn)
    z = (w_pos - mn - correction) / math.sqrt(var)
    return min(1.0, math.erfc(abs(z) / math.sqrt(2.0)))
