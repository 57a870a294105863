"""Exact nearest-neighbor search and rank computation on dense matrices.

Everything here is chunked over query rows so peak memory is
``O(chunk * N)`` rather than ``O(N^2)``. Neighbors of a row never include the
row itself, and equal scores are resolved in favor of the lower index.
"""
from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ArgumentError

NEIGHBOR_METRICS = ("dot", "euclidean")
CHUNK_BYTES = 64 * 2**20


def _chunk_rows(n: int) -> int:
    return max(1, min(n, CHUNK_BYTES // (8 * max(n, 1))))


def scores(x: np.ndarray, rows: slice, metric: str) -> np.ndarray:
    """Similarity of each query row in ``rows`` to every row; larger is closer."""
    if metric == "dot":
        return x[rows] @ x.T
    if metric == "euclidean":
        return -cdist(x[rows], x, "sqeuclidean")
    raise ArgumentError(f"unknown neighbor metric {metric!r}")


def knn(x: np.ndarray, k: int, metric: str = "dot") -> tuple[np.ndarray, np.ndarray]:
    """The ``k`` nearest rows of every row, nearest first.

    Returns ``(indices, scores)``, both ``N x k``. For ``euclidean`` the scores
    are distances (ascending); for ``dot`` they are similarities (descending).
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if not 1 <= k <= n - 1:
        raise ArgumentError(f"k={k} outside [1, {n - 1}]")
    idx_out = np.empty((n, k), dtype=np.int64)
    val_out = np.empty((n, k), dtype=np.float64)
    step = _chunk_rows(n)
    for start in range(0, n, step):
        stop = min(n, start + step)
        s = scores(x, slice(start, stop), metric)
        c = stop - start
        s[np.arange(c), np.arange(start, stop)] = -np.inf
        cols = np.argpartition(s, n - k, axis=1)[:, n - k :]
        vals = np.take_along_axis(s, cols, axis=1)
        thr = vals.min(axis=1)
        # rows where the k-th score is shared with an unselected item need the index tie-break
        ambiguous = np.flatnonzero((s == thr[:, None]).sum(axis=1) > (vals == thr[:, None]).sum(axis=1))
        for r in ambiguous:
            best = np.argsort(-s[r], kind="stable")[:k]
            cols[r], vals[r] = best, s[r, best]
        # order by score, ties by index
        order = np.lexsort((cols, -vals), axis=1)
        idx_out[start:stop] = np.take_along_axis(cols, order, axis=1)
        val_out[start:stop] = np.take_along_axis(vals, order, axis=1)
    if metric == "euclidean":
        val_out = np.sqrt(np.maximum(-val_out, 0.0))
    return idx_out, val_out


def rank_rows(x: np.ndarray, rows: np.ndarray, metric: str) -> np.ndarray:
    """Full neighbor ranks for the given query rows.

    Output ``r[a, j]`` is the rank (1 = closest) of item ``j`` relative to item
    ``rows[a]``; the query item itself gets rank 0.
    """
    n = x.shape[0]
    rows = np.asarray(rows, dtype=np.int64)
    out = np.empty((len(rows), n), dtype=np.int64)
    for a, i in enumerate(rows):
        s = scores(x, slice(i, i + 1), metric)[0]
        s[i] = -np.inf
        order = np.argsort(-s, kind="stable")
        out[a, order] = np.arange(1, n + 1)
        out[a, i] = 0
    return out


def gather_ranks(x: np.ndarray, targets: np.ndarray, metric: str) -> np.ndarray:
    """Rank of ``targets[i, t]`` relative to item ``i``, for every ``i``.

    Equivalent to ``rank_rows(x, arange(N))[i, targets[i]]`` without holding the
    full ``N x N`` table.
    """
    n = x.shape[0]
    out = np.empty(targets.shape, dtype=np.int64)
    step = _chunk_rows(n)
    for start in range(0, n, step):
        stop = min(n, start + step)
        c = stop - start
        s = scores(x, slice(start, stop), metric)
        s[np.arange(c), np.arange(start, stop)] = -np.inf
        order = np.argsort(-s, axis=1, kind="stable")
        ranks = np.empty_like(order)
        np.put_along_axis(ranks, order, np.arange(1, n + 1)[None, :].repeat(c, 0), axis=1)
        out[start:stop] = np.take_along_axis(ranks, targets[start:stop], axis=1)
    return out
