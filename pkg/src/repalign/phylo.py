"""Tree of models: confusion profiles, Jensen-Shannon distances, neighbor joining, Newick."""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .data import AlignmentMatrix
from .errors import ArgumentError

NEWICK_RESERVED = re.compile(r"[\s()\[\]':;,]")


@dataclass(frozen=True)
class ConfusionProfiles:
    row_profiles: np.ndarray
    col_profiles: np.ndarray
    epsilon: float


@dataclass(frozen=True)
class DistanceMatrix:
    labels: list
    values: np.ndarray


@dataclass
class PhyloTree:
    """Unrooted tree. Nodes ``0..M-1`` are leaves labelled by ``labels``."""

    labels: list
    adjacency: dict = field(default_factory=dict)

    def add_edge(self, u: int, v: int, length: float) -> None:
        self.adjacency.setdefault(u, {})[v] = length
        self.adjacency.setdefault(v, {})[u] = length

    @property
    def n_leaves(self) -> int:
        return len(self.labels)

    @property
    def internal_nodes(self) -> list:
        return [u for u in self.adjacency if u >= self.n_leaves]

    def edges(self) -> list:
        return [(u, v, w) for u, nb in self.adjacency.items() for v, w in nb.items() if u < v]

    def total_length(self) -> float:
        return float(sum(sorted(w for _, _, w in self.edges())))

    def distances_from(self, start: int) -> dict:
        dist = {start: 0.0}
        stack = [start]
        while stack:
            u = stack.pop()
            for v, w in self.adjacency.get(u, {}).items():
                if v not in dist:
                    dist[v] = dist[u] + w
                    stack.append(v)
        return dist

    def leaf_distances(self) -> np.ndarray:
        m = self.n_leaves
        out = np.zeros((m, m))
        for i in range(m):
            d = self.distances_from(i)
            out[i] = [d[j] for j in range(m)]
        return out

    def splits(self) -> dict:
        """Map each edge's leaf bipartition (side without leaf 0) to its length."""
        out = {}
        for u, v, w in self.edges():
            side = self._leaves_behind(v, u)
            if 0 in side:
                side = frozenset(range(self.n_leaves)) - side
            out[frozenset(self.labels[i] for i in side)] = w
        return out

    def _leaves_behind(self, start: int, blocked: int) -> frozenset:
        seen, stack, leaves = {blocked, start}, [start], set()
        while stack:
            u = stack.pop()
            if u < self.n_leaves:
                leaves.add(u)
            for v in self.adjacency[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return frozenset(leaves)


def _matrix_values(c) -> tuple[list, np.ndarray]:
    if isinstance(c, AlignmentMatrix):
        return list(c.model_names), c.values
    c = np.asarray(c, dtype=np.float64)
    return [str(i) for i in range(c.shape[0])], c


def confusion_profiles(c, epsilon: float = 1e-12) -> ConfusionProfiles:
    """Row- and column-normalized, epsilon-smoothed views of a similarity matrix."""
    _, v = _matrix_values(c)
    if v.ndim != 2 or v.shape[0] != v.shape[1]:
        raise ArgumentError(f"confusion matrix must be square, got {v.shape}")
    if np.isnan(v).any():
        raise ArgumentError("confusion matrix has missing cells")
    if (v < 0).any():
        raise ArgumentError("confusion matrix has negative entries")
    if epsilon <= 0:
        raise ArgumentError("epsilon must be positive")
    m = v.shape[0]
    rows = (v + epsilon) / (v.sum(axis=1, keepdims=True) + m * epsilon)
    cols = (v.T + epsilon) / (v.sum(axis=0)[:, None] + m * epsilon)
    return ConfusionProfiles(rows, cols, epsilon)


def jsd(p, q) -> float:
    """Jensen-Shannon divergence in bits."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ArgumentError(f"length mismatch: {p.shape} vs {q.shape}")
    for v in (p, q):
        if (v < 0).any() or abs(v.sum() - 1) > 1e-9:
            raise ArgumentError("inputs must be probability vectors")
    m = 0.5 * (p + q)

    def kl(a):
        nz = a > 0
        return float(np.sum(a[nz] * np.log2(a[nz] / m[nz])))

    return min(1.0, max(0.0, 0.5 * kl(p) + 0.5 * kl(q)))


def model_distance_matrix(c, alpha: float = 0.5, epsilon: float = 1e-12) -> DistanceMatrix:
    """Blend of row- and column-profile sqrt-JSD distances."""
    if not 0 <= alpha <= 1:
        raise ArgumentError(f"alpha must lie in [0, 1], got {alpha}")
    labels, _ = _matrix_values(c)
    prof = confusion_profiles(c, epsilon)
    m = len(labels)
    d = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            d[i, j] = d[j, i] = (alpha * np.sqrt(jsd(prof.row_profiles[i], prof.row_profiles[j]))
                                 + (1 - alpha) * np.sqrt(jsd(prof.col_profiles[i], prof.col_profiles[j])))
    return DistanceMatrix(labels, d)


def _check_distances(d: DistanceMatrix) -> np.ndarray:
    v = np.asarray(d.values, dtype=np.float64)
    if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] != len(d.labels):
        raise ArgumentError("distance matrix must be square and match its labels")
    if not np.allclose(v, v.T, rtol=0, atol=1e-12):
        raise ArgumentError("distance matrix is not symmetric")
    if (v < 0).any() or np.isnan(v).any():
        raise ArgumentError("distance matrix has negative or missing entries")
    return v


def _clamped(li: float, lj: float) -> tuple[float, float]:
    # a negative edge is set to 0 and its sibling absorbs the deficit
    if li < 0:
        return 0.0, li + lj
    if lj < 0:
        return li + lj, 0.0
    return li, lj


def neighbor_joining(d: DistanceMatrix) -> PhyloTree:
    """Saitou-Nei neighbor joining; ties in Q go to the lowest index pair."""
    v = _check_distances(d)
    m = len(d.labels)
    if m < 2:
        raise ArgumentError("neighbor joining needs at least 2 taxa")
    tree = PhyloTree(list(d.labels))
    for i in range(m):
        tree.adjacency.setdefault(i, {})
    nodes = list(range(m))
    dist = v.copy()
    next_id = m
    while len(nodes) > 2:
        r = len(nodes)
        sums = dist.sum(axis=1)
        q = (r - 2) * dist - sums[:, None] - sums[None, :]
        q[np.tril_indices(r)] = np.inf
        i, j = divmod(int(np.argmin(q)), r)
        li = 0.5 * (dist[i, j] + (sums[i] - sums[j]) / (r - 2))
        li, lj = _clamped(li, dist[i, j] - li)
        u = next_id
        next_id += 1
        tree.add_edge(nodes[i], u, li)
        tree.add_edge(nodes[j], u, lj)
        du = 0.5 * (dist[i] + dist[j] - dist[i, j])
        keep = [a for a in range(r) if a not in (i, j)]
        new = np.zeros((r - 1, r - 1))
        new[:-1, :-1] = dist[np.ix_(keep, keep)]
        new[-1, :-1] = new[:-1, -1] = du[keep]
        dist = new
        nodes = [nodes[a] for a in keep] + [u]
    tree.add_edge(nodes[0], nodes[1], max(0.0, float(dist[0, 1])))
    return tree


def _quote(label: str) -> str:
    if NEWICK_RESERVED.search(label):
        return "'" + label.replace("'", "''") + "'"
    return label


def _midpoint(tree: PhyloTree):
    """Node or (u, v, offset_from_u) where the longest leaf path is halved."""
    m = tree.n_leaves
    best = None
    for a in range(m):
        da = tree.distances_from(a)
        for b in range(a + 1, m):
            key = (-da[b], *sorted((tree.labels[a], tree.labels[b])))
            if best is None or key < best[0]:
                best = (key, a, b)
    _, a, b = best
    # walk the a -> b path
    parent = {a: None}
    stack = [a]
    while stack:
        u = stack.pop()
        for w in tree.adjacency[u]:
            if w not in parent:
                parent[w] = u
                stack.append(w)
    path = [b]
    while path[-1] != a:
        path.append(parent[path[-1]])
    path.reverse()
    half = -best[0][0] / 2
    walked = 0.0
    for u, w in zip(path, path[1:]):
        length = tree.adjacency[u][w]
        if walked == half:
            return u
        if walked + length > half:
            return (u, w, half - walked)
        walked += length
    return path[-1]


def to_newick(tree: PhyloTree, precision: int = 6) -> str:
    """Midpoint-rooted Newick with children ordered by their smallest leaf label."""
    if tree.n_leaves < 2:
        raise ArgumentError("a Newick tree needs at least 2 leaves")

    def fmt(length):
        return f"{max(0.0, length) + 0.0:.{precision}f}"

    def render(u, parent):
        if u < tree.n_leaves:
            return _quote(tree.labels[u]), tree.labels[u]
        kids = [render(w, u) + (tree.adjacency[u][w],) for w in tree.adjacency[u] if w != parent]
        return _join(kids)

    def _join(kids):
        kids.sort(key=lambda t: t[1])
        body = ",".join(f"{text}:{fmt(length)}" for text, _, length in kids)
        return f"({body})", kids[0][1]

    root = _midpoint(tree)
    if isinstance(root, tuple):
        u, w, offset = root
        total = tree.adjacency[u][w]
        kids = [render(u, w) + (offset,), render(w, u) + (total - offset,)]
        text, _ = _join(kids)
    elif root < tree.n_leaves:
        # degenerate: midpoint on a leaf (zero-length path); root at its neighbor
        w = next(iter(tree.adjacency[root]))
        kids = [render(root, w) + (0.0,), render(w, root) + (tree.adjacency[root][w],)]
        text, _ = _join(kids)
    else:
        text, _ = render(root, None)
    return text + ";"
