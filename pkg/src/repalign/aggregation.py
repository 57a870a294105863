"""All-pairs metric matrices, block condensation and convergence tables."""
from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.stats import spearmanr

from .data import METRICS, AlignmentMatrix, EmbeddingSet, check_aligned, normalize_rows
from .errors import ArgumentError, DataError, FormatError, RepalignError
from .global_metrics import dcor, information_imbalance
from .kernel import KnnView, cknna_views, embedding_cka

DEFAULT_PARAMS = {
    "cknna": {"k": 25, "centering": "scalar", "denominator": "literal", "similarity": "dot", "neighbors": "kernel"},
    "cka": {"centering": "scalar", "similarity": "dot"},
    "dcor": {"root": False},
    "ii-forward": {"k": 1, "distance": "euclidean"},
}


def resolve_params(metric: str, params: Optional[Mapping] = None) -> dict:
    if metric not in METRICS:
        raise ArgumentError(f"unknown metric {metric!r}; expected one of {METRICS}")
    out = dict(DEFAULT_PARAMS[metric])
    for key, value in (params or {}).items():
        if key not in out:
            raise ArgumentError(f"parameter {key!r} does not apply to {metric}")
        out[key] = value
    return out


def _pair_function(metric: str, params: dict, sets: Sequence[EmbeddingSet]):
    """Per-model preparation plus a ``(i, j) -> value`` callable."""
    if metric == "cknna":
        views, failures = {}, {}
        for i, s in enumerate(sets):
            try:
                views[i] = KnnView(s, params["k"], params["similarity"], params["neighbors"])
            except RepalignError as exc:
                failures[i] = str(exc)

        def fn(i, j):
            for a in (i, j):
                if a in failures:
                    raise DataError(failures[a])
            return cknna_views(views[i], views[j], params["centering"], params["denominator"])

        return fn
    if metric == "cka":
        return lambda i, j: embedding_cka(sets[i], sets[j], params["centering"], params["similarity"])
    if metric == "dcor":
        return lambda i, j: dcor(sets[i], sets[j], root=params["root"])
    return lambda i, j: information_imbalance(sets[i], sets[j], params["k"], params["distance"]).forward


def pairwise_matrix(sets: Sequence[EmbeddingSet], metric: str, params: Optional[Mapping] = None,
                    threads: int = 1) -> AlignmentMatrix:
    """Evaluate ``metric`` on every pair of models (ordered pairs for ii-forward).

    Inputs are max-abs normalized first. A pair whose metric fails is recorded
    as a missing cell with its reason; the run only fails if every cell is
    missing.
    """
    if len(sets) < 2:
        raise ArgumentError("pairwise_matrix needs at least 2 embedding sets")
    check_aligned(*sets)
    params = resolve_params(metric, params)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sets = [s if s.normalized else normalize_rows(s) for s in sets]
    m = len(sets)
    symmetric = metric != "ii-forward"
    if symmetric:
        cells = [(i, j) for i in range(m) for j in range(i, m)]
    else:
        cells = [(i, j) for i in range(m) for j in range(m)]
    fn = _pair_function(metric, params, sets)

    def run(cell):
        try:
            return fn(*cell), None
        except RepalignError as exc:
            return math.nan, str(exc)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, cells))
    else:
        results = [run(c) for c in cells]
    values = np.full((m, m), math.nan)
    missing = {}
    for (i, j), (value, reason) in zip(cells, results):
        values[i, j] = value
        if reason is not None:
            missing[(i, j)] = reason
        if symmetric and i != j:
            values[j, i] = value
            if reason is not None:
                missing[(j, i)] = reason
    if np.all(np.isnan(values)):
        raise DataError("every cell of the alignment matrix is missing: " + next(iter(missing.values())))
    return AlignmentMatrix(
        [s.model_name for s in sets], values, metric, params, symmetric, missing,
        [s.model_name for s in sets if s.baseline],
    )


@dataclass(frozen=True)
class GroupSpec:
    """Ordered model -> group assignment; group order is first appearance."""

    assignments: tuple

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, str]) -> "GroupSpec":
        return cls(tuple((str(k), str(v)) for k, v in mapping.items()))

    @property
    def groups(self) -> list:
        seen = []
        for _, g in self.assignments:
            if g not in seen:
                seen.append(g)
        return seen

    def members(self, group: str) -> list:
        return [m for m, g in self.assignments if g == group]


def load_groups(path) -> GroupSpec:
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.reader(line for line in fh if line.strip() and not line.startswith("#")):
            if len(row) != 2:
                raise FormatError(f"{path}: expected two columns model,group, got {row}")
            rows.append((row[0].strip(), row[1].strip()))
    if rows and rows[0] == ("model", "group"):
        rows = rows[1:]
    return GroupSpec(tuple(rows))


def condense(m: AlignmentMatrix, groups: GroupSpec) -> AlignmentMatrix:
    """Average the matrix over group blocks, self-diagonal cells included."""
    names = [n for n, _ in groups.assignments]
    if len(set(names)) != len(names):
        raise ArgumentError("a model appears in more than one group")
    unknown = set(m.model_names) - set(names)
    if unknown:
        raise ArgumentError(f"models without a group: {sorted(unknown)}")
    labels = groups.groups
    idx = {g: [m.index(n) for n in groups.members(g) if n in m.model_names] for g in labels}
    labels = [g for g in labels if idx[g]]
    out = np.full((len(labels), len(labels)), math.nan)
    missing = {}
    for a, ga in enumerate(labels):
        for b, gb in enumerate(labels):
            block = m.values[np.ix_(idx[ga], idx[gb])]
            valid = block[~np.isnan(block)]
            if valid.size:
                out[a, b] = valid.mean()
            else:
                missing[(a, b)] = f"no valid cells between groups {ga!r} and {gb!r}"
    baseline_groups = [g for g in labels if all(n in m.baselines for n in groups.members(g))]
    params = dict(m.params, condensed=True)
    return AlignmentMatrix(labels, out, m.metric, params, m.symmetric, missing, baseline_groups)


@dataclass(frozen=True)
class ConvergenceRow:
    model_name: str
    performance: float
    alignment: float
    size: Optional[float] = None


def convergence_table(m: AlignmentMatrix, performance: Mapping[str, float], reference: str,
                      sizes: Optional[Mapping[str, float]] = None) -> tuple[list, dict]:
    """Alignment of every model to ``reference`` next to its performance (MAE).

    The summary holds the Spearman correlation between MAE and alignment
    (negative when better models are more aligned), or ``None`` when
    undefined.
    """
    r = m.index(reference)
    rows = []
    for i, name in enumerate(m.model_names):
        if name == reference:
            continue
        if name not in performance:
            raise ArgumentError(f"no performance value for {name!r}")
        perf = float(performance[name])
        if perf < 0:
            raise ArgumentError(f"performance of {name!r} is negative")
        size = None if sizes is None or name not in sizes else float(sizes[name])
        rows.append(ConvergenceRow(name, perf, float(m.values[i, r]), size))
    perf = np.array([row.performance for row in rows])
    align = np.array([row.alignment for row in rows])
    ok = ~np.isnan(align)
    rho = None
    if ok.sum() >= 2 and np.ptp(perf[ok]) > 0 and np.ptp(align[ok]) > 0:
        rho = float(spearmanr(perf[ok], align[ok]).statistic)
    summary = {"reference": reference, "n": int(ok.sum()), "spearman_mae_vs_alignment": rho,
               "metric": m.metric}
    return rows, summary
