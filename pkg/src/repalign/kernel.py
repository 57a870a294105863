"""Inner-product kernels, centering, HSIC, CKA and mutual-kNN alignment (CKNNA)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import EmbeddingSet, check_aligned, ensure_normalized
from .errors import ArgumentError, DegenerateInputError
from .neighbors import knn

CENTERINGS = ("scalar", "double")
SIMILARITIES = ("dot", "cosine")
NEIGHBOR_MODES = ("kernel", "euclidean")
DENOMINATORS = ("literal", "cross")


@dataclass(frozen=True)
class KernelMatrix:
    values: np.ndarray
    centering: str = "none"
    source_model: str = ""

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class MutualMask:
    k: int
    entries: np.ndarray


def _check_choice(name, value, options):
    if value not in options:
        raise ArgumentError(f"{name} must be one of {options}, got {value!r}")


def kernel_features(s: EmbeddingSet, similarity: str = "dot") -> np.ndarray:
    """Rows whose plain dot products form the kernel.

    ``dot`` uses the max-abs normalized rows; ``cosine`` further scales each
    non-zero row to unit length.
    """
    _check_choice("similarity", similarity, SIMILARITIES)
    x = ensure_normalized(s).values
    if similarity == "cosine":
        norms = np.linalg.norm(x, axis=1)
        x = x / np.where(norms == 0, 1.0, norms)[:, None]
    return x


def _symmetrize(a: np.ndarray) -> np.ndarray:
    upper = np.triu(a)
    return upper + np.triu(upper, 1).T


def inner_product_kernel(s: EmbeddingSet, similarity: str = "dot") -> KernelMatrix:
    if s.n_items == 0:
        raise ArgumentError(f"{s.model_name}: empty embedding set")
    x = kernel_features(s, similarity)
    return KernelMatrix(_symmetrize(x @ x.T), "none", s.model_name)


def center_kernel(k: KernelMatrix, mode: str = "scalar") -> KernelMatrix:
    """Subtract the grand mean (``scalar``) or apply ``H K H`` (``double``)."""
    _check_choice("centering", mode, CENTERINGS)
    if k.centering != "none":
        raise ArgumentError(f"kernel of {k.source_model!r} is already {k.centering}-centered")
    v = k.values
    if mode == "scalar":
        out = v - v.mean()
    else:
        rows = v.mean(axis=1)
        cols = v.mean(axis=0)
        out = _symmetrize(v - rows[:, None] - cols[None, :] + v.mean())
    return KernelMatrix(out, mode, k.source_model)


def hsic(kc: KernelMatrix, lc: KernelMatrix) -> float:
    """Trace(Kc Lc^T) / (N - 1)^2 for two kernels centered the same way."""
    if kc.n != lc.n:
        raise ArgumentError(f"kernel sizes differ: {kc.n} vs {lc.n}")
    if kc.centering == "none" or kc.centering != lc.centering:
        raise ArgumentError(f"kernels must share a centering mode, got {kc.centering!r} and {lc.centering!r}")
    n = kc.n
    if n < 2:
        raise ArgumentError("HSIC needs at least 2 items")
    return float(np.sum(kc.values * lc.values) / (n - 1) ** 2)


def cka(k: KernelMatrix, l: KernelMatrix, mode: str = "scalar") -> float:
    if k.centering != "none" or l.centering != "none":
        raise ArgumentError("cka expects uncentered kernels")
    if k.n != l.n:
        raise ArgumentError(f"kernel sizes differ: {k.n} vs {l.n}")
    if k.n < 2:
        raise ArgumentError("CKA needs at least 2 items")
    kc, lc = center_kernel(k, mode), center_kernel(l, mode)
    kk, ll = hsic(kc, kc), hsic(lc, lc)
    for side, name, val in (("first", k.source_model, kk), ("second", l.source_model, ll)):
        if val <= 0:
            raise DegenerateInputError(f"HSIC of the {side} kernel ({name!r}) is zero")
    return float(np.clip(hsic(kc, lc) / np.sqrt(kk * ll), -1.0, 1.0))


def embedding_cka(f: EmbeddingSet, g: EmbeddingSet, mode: str = "scalar", similarity: str = "dot") -> float:
    check_aligned(f, g)
    return cka(inner_product_kernel(f, similarity), inner_product_kernel(g, similarity), mode)


# --- CKNNA -----------------------------------------------------------------

class KnnView:
    """Per-model state for CKNNA, computed once and reused across pairs.

    Holds the kernel features, the k-nearest-neighbor lists and the means
    needed to center any kernel entry without forming the N x N kernel.
    """

    def __init__(self, s: EmbeddingSet, k: int, similarity: str = "dot", neighbors: str = "kernel"):
        _check_choice("neighbors", neighbors, NEIGHBOR_MODES)
        n = s.n_items
        if not 1 <= k <= n - 1:
            raise ArgumentError(f"k={k} outside [1, {n - 1}] for {s.model_name!r}")
        self.name = s.model_name
        self.k = k
        self.n = n
        self.x = np.ascontiguousarray(kernel_features(s, similarity))
        idx, _ = knn(self.x, k, "dot" if neighbors == "kernel" else "euclidean")
        self.neighbors = np.sort(idx, axis=1)
        total = self.x.sum(axis=0)
        self.row_means = self.x @ total / n
        self.grand_mean = float(total @ total) / n**2
        # flat pair codes i*N + j, globally ascending
        self.pairs = (np.arange(n, dtype=np.int64)[:, None] * n + self.neighbors).ravel()
        self._self_align = {}

    def self_align(self, mode: str) -> float:
        """Align(K, K) over this model's own neighbor mask, cached per centering."""
        if mode not in self._self_align:
            self._self_align[mode] = align(self, self, self.pairs, mode)
        return self._self_align[mode]

    def centered(self, i: np.ndarray, j: np.ndarray, mode: str) -> np.ndarray:
        vals = _pair_dots(self.x, i, j)
        if mode == "scalar":
            return vals - self.grand_mean
        return vals - self.row_means[i] - self.row_means[j] + self.grand_mean


def _pair_dots(x: np.ndarray, i: np.ndarray, j: np.ndarray) -> np.ndarray:
    out = np.empty(len(i), dtype=np.float64)
    step = max(1, (32 * 2**20) // (8 * x.shape[1]))
    for a in range(0, len(i), step):
        b = a + step
        out[a:b] = np.einsum("ij,ij->i", x[i[a:b]], x[j[a:b]])
    return out


def _split(codes: np.ndarray, n: int):
    return codes // n, codes % n


def mutual_pairs(a: KnnView, b: KnnView) -> np.ndarray:
    """Pair codes where j is among the k nearest of i in both spaces."""
    if a.n != b.n:
        raise ArgumentError(f"item count mismatch: {a.n} vs {b.n}")
    return np.intersect1d(a.pairs, b.pairs, assume_unique=True)


def mutual_knn_mask(f: EmbeddingSet, g: EmbeddingSet, k: int, neighbors: str = "kernel",
                    similarity: str = "dot") -> MutualMask:
    n = check_aligned(f, g)
    codes = mutual_pairs(KnnView(f, k, similarity, neighbors), KnnView(g, k, similarity, neighbors))
    entries = np.zeros((n, n), dtype=bool)
    i, j = _split(codes, n)
    entries[i, j] = True
    return MutualMask(k, entries)


def align(a: KnnView, b: KnnView, codes: np.ndarray, mode: str) -> float:
    i, j = _split(codes, a.n)
    return float(np.sum(a.centered(i, j, mode) * b.centered(i, j, mode)))


def cknna_views(a: KnnView, b: KnnView, mode: str = "scalar", denominator: str = "literal") -> float:
    _check_choice("centering", mode, CENTERINGS)
    _check_choice("denominator", denominator, DENOMINATORS)
    if a.k != b.k:
        raise ArgumentError(f"views were built with different k ({a.k} vs {b.k})")
    cross = mutual_pairs(a, b)
    num = align(a, b, cross, mode)
    if denominator == "literal":
        kk, ll = a.self_align(mode), b.self_align(mode)
    else:
        kk = align(a, a, cross, mode)
        ll = align(b, b, cross, mode)
    if kk <= 0 or ll <= 0:
        side = a.name if kk <= 0 else b.name
        raise DegenerateInputError(f"self-alignment of {side!r} is zero (degenerate neighborhoods)")
    return float(np.clip(num / np.sqrt(kk * ll), -1.0, 1.0))


def cknna(f: EmbeddingSet, g: EmbeddingSet, k: int = 25, mode: str = "scalar",
          denominator: str = "literal", similarity: str = "dot", neighbors: str = "kernel") -> float:
    """Centered kernel nearest-neighbor alignment of two aligned embedding sets.

    The numerator sums centered kernel products over mutual k-nearest pairs;
    with ``denominator="literal"`` each self-alignment uses that model's own
    neighbor mask, with ``"cross"`` both reuse the mutual mask.
    """
    check_aligned(f, g)
    return cknna_views(KnnView(f, k, similarity, neighbors), KnnView(g, k, similarity, neighbors),
                       mode, denominator)
