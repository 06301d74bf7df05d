"""Similarity functions between two attribution maps.

SSIM follows the canonical windowed form (7x7 Gaussian window, sigma 1.5,
C1=(0.01 R)^2, C2=(0.03 R)^2) with R the joint value range of the two maps;
maps smaller than the window are compared with one global window instead.
Correlations reject zero-variance inputs rather than returning NaN.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatchError
from ..stats import average_ranks

SIMILARITY_IDS = ("SSIM", "SpearmanRank", "Pearson", "MSE")

_WINDOW_SIZE = 7
_WINDOW_SIGMA = 1.5


def _gaussian_window() -> np.ndarray:
    half = (_WINDOW_SIZE - 1) / 2.0
    coords = np.arange(_WINDOW_SIZE) - half
    g = np.exp(-(coords ** 2) / (2.0 * _WINDOW_SIGMA ** 2))
    k = np.outer(g, g)
    return k / k.sum()


_WINDOW = _gaussian_window()


def _filter_valid(img: np.ndarray) -> np.ndarray:
    windows = np.lib.stride_tricks.sliding_window_view(img, (_WINDOW_SIZE, _WINDOW_SIZE))
    return np.einsum("hwij,ij->hw", windows, _WINDOW)


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Structural similarity; 1.0 for identical maps, symmetric in (a, b)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"ssim inputs differ in shape: {a.shape} vs {b.shape}")
    if a.ndim != 2:
        raise ShapeMismatchError(f"ssim expects 2-D maps, got {a.ndim}-D")
    r = max(a.max(), b.max()) - min(a.min(), b.min())
    if r == 0:
        if np.array_equal(a, b):
            return 1.0
        raise ValueError("zero joint value range with differing inputs")
    c1 = (0.01 * r) ** 2
    c2 = (0.03 * r) ** 2
    if min(a.shape) < _WINDOW_SIZE:
        mu_a, mu_b = a.mean(), b.mean()
        var_a = ((a - mu_a) ** 2).mean()
        var_b = ((b - mu_b) ** 2).mean()
        cov = ((a - mu_a) * (b - mu_b)).mean()
        num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
        den = (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
        return float(num / den)
    mu_a = _filter_valid(a)
    mu_b = _filter_valid(b)
    var_a = _filter_valid(a * a) - mu_a * mu_a
    var_b = _filter_valid(b * b) - mu_b * mu_b
    cov = _filter_valid(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float((num / den).mean())


def _flat_pair(a, b):
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ShapeMismatchError("inputs differ in length")
    if len(a) < 2:
        raise ValueError("need at least 2 values")
    return a, b


def pearson(a, b) -> float:
    a, b = _flat_pair(a, b)
    da = a - a.mean()
    db = b - b.mean()
    na = np.sqrt((da * da).sum())
    nb = np.sqrt((db * db).sum())
    if na == 0 or nb == 0:
        raise ValueError("zero-variance input in correlation")
    return float((da * db).sum() / (na * nb))


def spearman(a, b) -> float:
    """Rank correlation with average ranks on ties."""
    a, b = _flat_pair(a, b)
    return pearson(average_ranks(a), average_ranks(b))


def mse(a, b) -> float:
    a, b = _flat_pair(a, b)
    return float(((a - b) ** 2).mean())


def similarity_fn(name: str):
    table = {"SSIM": ssim, "SpearmanRank": spearman, "Pearson": pearson, "MSE": mse}
    if name not in table:
        raise ValueError(f"unknown similarity {name!r}; expected one of {SIMILARITY_IDS}")
    return table[name]


def compare_maps(name: str, a: np.ndarray, b: np.ndarray) -> float:
    """Apply a similarity to attribution tensors.

    SSIM sees a 2-D map (channels averaged if more than one); the other
    measures see flattened vectors.
    """
    if name == "SSIM":
        a2 = np.asarray(a, dtype=np.float64)
        b2 = np.asarray(b, dtype=np.float64)
        if a2.ndim == 3:
            a2 = a2.mean(axis=0)
            b2 = b2.mean(axis=0)
        return ssim(a2, b2)
    return similarity_fn(name)(a, b)
