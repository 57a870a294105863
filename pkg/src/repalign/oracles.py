"""Deliberately naive reference implementations used for verification.

Each function transcribes its formula with explicit loops and no algebraic
shortcuts. They are capped at 256 items.
"""
from __future__ import annotations

import math

import numpy as np

from .data import EmbeddingSet
from .errors import ArgumentError

MAX_N = 256


def _rows(s) -> list:
    x = s.values if isinstance(s, EmbeddingSet) else np.asarray(s)
    if x.shape[0] > MAX_N:
        raise ArgumentError(f"oracles accept at most {MAX_N} items, got {x.shape[0]}")
    return [list(map(float, r)) for r in x]


def _maybe_normalize(s) -> list:
    rows = _rows(s)
    if isinstance(s, EmbeddingSet) and s.normalized:
        return rows
    out = []
    for r in rows:
        m = max(abs(v) for v in r)
        out.append(r if m == 0 else [v / m for v in r])
    return out


def oracle_kernel(rows: list) -> list:
    n = len(rows)
    return [[sum(a * b for a, b in zip(rows[i], rows[j])) for j in range(n)] for i in range(n)]


def oracle_center(k: list, mode: str = "scalar") -> list:
    n = len(k)
    grand = sum(sum(r) for r in k) / (n * n)
    if mode == "scalar":
        return [[k[i][j] - grand for j in range(n)] for i in range(n)]
    row = [sum(k[i]) / n for i in range(n)]
    col = [sum(k[i][j] for i in range(n)) / n for j in range(n)]
    return [[k[i][j] - row[i] - col[j] + grand for j in range(n)] for i in range(n)]


def oracle_hsic(kc, lc) -> float:
    kc, lc = _matrix(kc), _matrix(lc)
    n = len(kc)
    total = 0.0
    for i in range(n):
        for j in range(n):
            total += kc[i][j] * lc[i][j]
    return total / (n - 1) ** 2


def _matrix(m) -> list:
    v = getattr(m, "values", m)
    v = np.asarray(v)
    if v.shape[0] > MAX_N:
        raise ArgumentError(f"oracles accept at most {MAX_N} items, got {v.shape[0]}")
    return v.tolist()


def oracle_cka(f, g, mode: str = "scalar") -> float:
    kc = oracle_center(oracle_kernel(_maybe_normalize(f)), mode)
    lc = oracle_center(oracle_kernel(_maybe_normalize(g)), mode)
    return oracle_hsic(kc, lc) / math.sqrt(oracle_hsic(kc, kc) * oracle_hsic(lc, lc))


def _nearest(k: list, i: int, count: int) -> set:
    others = [j for j in range(len(k)) if j != i]
    others.sort(key=lambda j: (-k[i][j], j))
    return set(others[:count])


def oracle_mask(f, g, k: int) -> list:
    kf, kg = oracle_kernel(_maybe_normalize(f)), oracle_kernel(_maybe_normalize(g))
    n = len(kf)
    out = [[False] * n for _ in range(n)]
    for i in range(n):
        both = _nearest(kf, i, k) & _nearest(kg, i, k)
        for j in both:
            out[i][j] = True
    return out


def oracle_cknna(f, g, k: int, mode: str = "scalar", denominator: str = "literal") -> float:
    kf, kg = oracle_kernel(_maybe_normalize(f)), oracle_kernel(_maybe_normalize(g))
    kc, lc = oracle_center(kf, mode), oracle_center(kg, mode)
    n = len(kf)
    nf = [_nearest(kf, i, k) for i in range(n)]
    ng = [_nearest(kg, i, k) for i in range(n)]

    def align(a, b, mask):
        total = 0.0
        for i in range(n):
            for j in range(n):
                if mask(i, j):
                    total += a[i][j] * b[i][j]
        return total

    def cross(i, j):
        return j in nf[i] and j in ng[i]

    num = align(kc, lc, cross)
    if denominator == "literal":
        kk = align(kc, kc, lambda i, j: j in nf[i])
        ll = align(lc, lc, lambda i, j: j in ng[i])
    else:
        kk, ll = align(kc, kc, cross), align(lc, lc, cross)
    return num / math.sqrt(kk * ll)


def _distances(rows: list) -> list:
    n = len(rows)
    return [[math.sqrt(sum((a - b) ** 2 for a, b in zip(rows[i], rows[j]))) for j in range(n)]
            for i in range(n)]


def oracle_dcor(f, g) -> float:
    def centered(d):
        n = len(d)
        row = [sum(d[k][l] for l in range(n)) / n for k in range(n)]
        col = [sum(d[k][l] for k in range(n)) / n for l in range(n)]
        grand = sum(sum(r) for r in d) / n**2
        return [[d[k][l] - row[k] - col[l] + grand for l in range(n)] for k in range(n)]

    a, b = centered(_distances(_rows(f))), centered(_distances(_rows(g)))
    n = len(a)

    def mean_prod(p, q):
        return sum(p[k][l] * q[k][l] for k in range(n) for l in range(n)) / n**2

    return mean_prod(a, b) / math.sqrt(mean_prod(a, a) * mean_prod(b, b))


def oracle_ranks(s, distance: str = "euclidean") -> list:
    rows = _rows(s)
    n = len(rows)
    if distance == "euclidean":
        d = _distances(rows)
        key = lambda i, j: (d[i][j], j)  # noqa: E731
    else:
        kk = oracle_kernel(rows)
        key = lambda i, j: (-kk[i][j], j)  # noqa: E731
    table = [[0] * n for _ in range(n)]
    for i in range(n):
        for r, j in enumerate(sorted((j for j in range(n) if j != i), key=lambda j: key(i, j)), start=1):
            table[i][j] = r
    return table


def oracle_imbalance(f, g, k: int = 1) -> tuple:
    rf, rg = oracle_ranks(f), oracle_ranks(g)
    n = len(rf)

    def one(ra, rb):
        total = 0
        for i in range(n):
            for j in range(n):
                if j != i and ra[i][j] <= k:
                    total += rb[i][j]
        return 2.0 * total / (n * n * k)

    return one(rf, rg), one(rg, rf)
