"""Distance correlation and information imbalance."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .data import EmbeddingSet, check_aligned
from .errors import ArgumentError, DegenerateInputError
from .neighbors import _chunk_rows, gather_ranks, knn, rank_rows

RANK_DISTANCES = {"euclidean": "euclidean", "inner-product": "dot"}


@dataclass(frozen=True)
class CenteredDistanceMatrix:
    raw: np.ndarray
    row_means: np.ndarray
    col_means: np.ndarray
    grand_mean: float
    centered: np.ndarray


@dataclass(frozen=True)
class NeighborTable:
    """``ranks[i, j]`` is the neighbor rank of j around i (diagonal is 0)."""

    ranks: np.ndarray
    k_lists: np.ndarray

    def copula(self) -> np.ndarray:
        return self.ranks / self.ranks.shape[0]


@dataclass(frozen=True)
class ImbalancePair:
    forward: float
    backward: float
    k: int
    n: int


def centered_distance_matrix(s: EmbeddingSet) -> CenteredDistanceMatrix:
    if s.n_items < 2:
        raise ArgumentError("distance centering needs at least 2 items")
    a = cdist(s.values, s.values)
    rows, cols, grand = a.mean(axis=1), a.mean(axis=0), a.mean()
    return CenteredDistanceMatrix(a, rows, cols, float(grand), a - rows[:, None] - cols[None, :] + grand)


def _distance_row_means(x: np.ndarray) -> np.ndarray:
    n = x.shape[0]
    out = np.empty(n)
    step = _chunk_rows(n)
    for start in range(0, n, step):
        out[start : start + step] = cdist(x[start : start + step], x).mean(axis=1)
    return out


def distance_moments(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Means over all (k, l) of A*B, A*A and B*B for double-centered distances.

    Two chunked passes: row means first, then the centered products, so memory
    stays at ``O(chunk * N)``. Distance matrices are symmetric, so row means
    double as column means.
    """
    n = x.shape[0]
    ra, rb = _distance_row_means(x), _distance_row_means(y)
    ga, gb = ra.mean(), rb.mean()
    sab = saa = sbb = 0.0
    step = _chunk_rows(n)
    for start in range(0, n, step):
        stop = min(n, start + step)
        a = cdist(x[start:stop], x) - ra[start:stop, None] - ra[None, :] + ga
        b = cdist(y[start:stop], y) - rb[start:stop, None] - rb[None, :] + gb
        sab += float(np.sum(a * b))
        saa += float(np.sum(a * a))
        sbb += float(np.sum(b * b))
    return sab / n**2, saa / n**2, sbb / n**2


def dcor(f: EmbeddingSet, g: EmbeddingSet, root: bool = False) -> float:
    """cov(A, B) / sqrt(var(A) var(B)) on double-centered distance matrices.

    This ratio is the squared distance correlation of the statistics
    literature; ``root=True`` returns its square root instead.
    """
    n = check_aligned(f, g)
    if n < 2:
        raise ArgumentError("dcor needs at least 2 items")
    cov, var_a, var_b = distance_moments(f.values, g.values)
    for name, var in ((f.model_name, var_a), (g.model_name, var_b)):
        if var <= 0:
            raise DegenerateInputError(f"distance variance of {name!r} is zero (all points coincide)")
    value = min(1.0, max(0.0, cov / np.sqrt(var_a * var_b)))
    return float(np.sqrt(value)) if root else float(value)


def _rank_metric(distance: str) -> str:
    try:
        return RANK_DISTANCES[distance]
    except KeyError:
        raise ArgumentError(f"distance must be one of {tuple(RANK_DISTANCES)}, got {distance!r}") from None


def rank_table(s: EmbeddingSet, distance: str = "euclidean") -> NeighborTable:
    """Dense neighbor ranks (1 = closest, ties by lower index)."""
    metric = _rank_metric(distance)
    n = s.n_items
    if n < 2:
        raise ArgumentError("rank table needs at least 2 items")
    ranks = rank_rows(s.values, np.arange(n), metric)
    k_lists = np.argsort(np.where(ranks == 0, n, ranks), axis=1, kind="stable")[:, : n - 1]
    return NeighborTable(ranks, k_lists)


def information_imbalance(f: EmbeddingSet, g: EmbeddingSet, k: int = 1,
                          distance: str = "euclidean") -> ImbalancePair:
    """Forward and backward information imbalance at neighborhood size ``k``.

    ``forward`` is (2/N) times the mean g-rank of each item's k nearest
    f-neighbors; with ``k=1`` this is the usual nearest-neighbor estimator.
    """
    n = check_aligned(f, g)
    if not 1 <= k <= n - 1:
        raise ArgumentError(f"k={k} outside [1, {n - 1}]")
    metric = _rank_metric(distance)
    nn_f, _ = knn(f.values, k, metric)
    nn_g, _ = knn(g.values, k, metric)
    fwd = gather_ranks(g.values, nn_f, metric)
    bwd = gather_ranks(f.values, nn_g, metric)
    return ImbalancePair(float(2.0 * fwd.mean() / n), float(2.0 * bwd.mean() / n), k, n)


def ranks_from_distances(d: np.ndarray) -> np.ndarray:
    """Neighbor ranks from a dense distance matrix (diagonal gets rank 0)."""
    d = np.array(d, dtype=np.float64)
    n = d.shape[0]
    np.fill_diagonal(d, np.inf)
    order = np.argsort(d, axis=1, kind="stable")
    ranks = np.empty_like(order)
    np.put_along_axis(ranks, order, np.arange(1, n + 1)[None, :].repeat(n, 0), axis=1)
    np.fill_diagonal(ranks, 0)
    return ranks


def imbalance_from_distances(df: np.ndarray, dg: np.ndarray, k: int = 1) -> ImbalancePair:
    """Information imbalance from precomputed distance matrices."""
    n = df.shape[0]
    if dg.shape != df.shape or df.shape != (n, n):
        raise ArgumentError("distance matrices must be square and of equal size")
    if not 1 <= k <= n - 1:
        raise ArgumentError(f"k={k} outside [1, {n - 1}]")
    rf, rg = ranks_from_distances(df), ranks_from_distances(dg)
    nn_f = np.argsort(np.where(rf == 0, n, rf), axis=1, kind="stable")[:, :k]
    nn_g = np.argsort(np.where(rg == 0, n, rg), axis=1, kind="stable")[:, :k]
    fwd = np.take_along_axis(rg, nn_f, axis=1)
    bwd = np.take_along_axis(rf, nn_g, axis=1)
    return ImbalancePair(float(2.0 * fwd.mean() / n), float(2.0 * bwd.mean() / n), k, n)
