"""Intrinsic dimension estimators: TwoNN and the pooled k-NN MLE."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .data import EmbeddingSet
from .errors import ArgumentError, DataError, DegenerateInputError
from .neighbors import knn

MIN_POINTS = 10


@dataclass(frozen=True)
class IdEstimate:
    value: float
    method: str
    k_or_discard: float
    fit_r2: float
    n_used: int


class FitQualityWarning(UserWarning):
    pass


def unique_rows(x: np.ndarray) -> np.ndarray:
    """Drop repeated rows, keeping the first occurrence in original order."""
    _, first = np.unique(x, axis=0, return_index=True)
    if len(first) < x.shape[0]:
        warnings.warn(f"removed {x.shape[0] - len(first)} duplicate points")
    return x[np.sort(first)]


def twonn_id(s: EmbeddingSet, discard_fraction: float = 0.1, cdf: str = "i/N") -> IdEstimate:
    """TwoNN estimate from the ratio of second to first neighbor distances.

    Fits ``-ln(1 - P) = d * ln(mu)`` through the origin on the sorted ratios,
    after dropping the largest ``discard_fraction`` of them.
    """
    if not 0 <= discard_fraction < 0.5:
        raise ArgumentError(f"discard_fraction must lie in [0, 0.5), got {discard_fraction}")
    if cdf not in ("i/N", "i/(N+1)"):
        raise ArgumentError(f"unknown empirical CDF {cdf!r}")
    x = unique_rows(s.values)
    n = x.shape[0]
    if n < MIN_POINTS:
        raise DataError(f"TwoNN needs at least {MIN_POINTS} distinct points, got {n}")
    _, dist = knn(x, 2, "euclidean")
    mu = np.sort(dist[:, 1] / dist[:, 0])
    p = np.arange(1, n + 1) / (n if cdf == "i/N" else n + 1)
    keep = int(n * (1 - discard_fraction))
    mu, p = mu[:keep], p[:keep]
    mu, p = mu[p < 1], p[p < 1]
    if len(mu) < MIN_POINTS:
        raise DataError(f"only {len(mu)} ratios left after trimming")
    lx, ly = np.log(mu), -np.log1p(-p)
    sxx = float(lx @ lx)
    if sxx == 0:
        raise DegenerateInputError("all neighbor-distance ratios equal 1")
    slope = float(lx @ ly) / sxx
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum((ly - slope * lx) ** 2)) / ss_tot if ss_tot > 0 else 1.0
    if r2 < 0.9:
        warnings.warn(f"TwoNN fit R^2 = {r2:.3f} is below 0.9", FitQualityWarning)
    return IdEstimate(slope, "twonn", discard_fraction, r2, len(mu))


def mle_id(s: EmbeddingSet, k: int = 50) -> IdEstimate:
    """k-NN maximum-likelihood estimate, pooled as the inverse of the mean inverse."""
    x = unique_rows(s.values)
    n = x.shape[0]
    if k < 2 or n <= k:
        raise ArgumentError(f"MLE needs N > k >= 2, got N={n}, k={k}")
    if n < MIN_POINTS:
        raise DataError(f"MLE needs at least {MIN_POINTS} distinct points, got {n}")
    _, dist = knn(x, k, "euclidean")
    inv = np.log(dist[:, -1:] / dist[:, :-1]).sum(axis=1) / (k - 1)
    mean_inv = float(inv.mean())
    if mean_inv <= 0:
        raise DegenerateInputError("k-th neighbor distance equals all closer ones")
    return IdEstimate(1.0 / mean_inv, "mle", k, 1.0, n)
