"""Linear compositional energy baselines and the cross-level-of-theory MAE."""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .errors import ArgumentError, DataError, FormatError


def parse_composition(text: str) -> dict:
    """``"Fe:2,O:3"`` -> ``{"Fe": 2, "O": 3}``."""
    out = {}
    for part in text.replace(";", ",").split(","):
        part = part.strip()
        if not part:
            continue
        try:
            el, count = part.split(":")
            n = int(count)
        except ValueError:
            raise FormatError(f"bad composition entry {part!r}") from None
        if n < 0:
            raise FormatError(f"negative count in {part!r}")
        out[el.strip()] = out.get(el.strip(), 0) + n
    if not any(out.values()):
        raise FormatError(f"composition {text!r} has no atoms")
    return out


@dataclass(frozen=True)
class CompositionVector:
    counts: np.ndarray
    element_order: tuple

    @classmethod
    def from_mapping(cls, comp: Mapping[str, int], element_order: Sequence[str]) -> "CompositionVector":
        unknown = set(comp) - set(element_order)
        if unknown:
            raise ArgumentError(f"unknown elements {sorted(unknown)}")
        return cls(np.array([comp.get(e, 0) for e in element_order], dtype=np.float64), tuple(element_order))


def _as_mappings(comps) -> list:
    out = []
    for c in comps:
        if isinstance(c, CompositionVector):
            out.append({e: n for e, n in zip(c.element_order, c.counts) if n})
        elif isinstance(c, str):
            out.append(parse_composition(c))
        else:
            out.append(dict(c))
    return out


def composition_matrix(comps, element_order: Sequence[str]) -> np.ndarray:
    return np.array([CompositionVector.from_mapping(c, element_order).counts for c in _as_mappings(comps)])


@dataclass(frozen=True)
class LinearCompositionalFit:
    weights: np.ndarray
    intercept: float
    residual_rms: float
    n_fit: int
    element_order: tuple
    dropped: tuple = ()

    def predict(self, comps) -> np.ndarray:
        return composition_matrix(comps, self.element_order) @ self.weights + self.intercept


def _independent_columns(a: np.ndarray) -> list:
    kept = []
    for c in range(a.shape[1]):
        trial = kept + [c]
        if np.linalg.matrix_rank(a[:, trial]) == len(trial):
            kept = trial
    return kept


def fit_linear_compositional(comps, energies, element_order: Optional[Sequence[str]] = None) -> LinearCompositionalFit:
    """Least-squares fit of ``E = w . c + b`` via QR.

    Columns that are linearly dependent on earlier ones (intercept first,
    then elements in order) are dropped with a warning and get weight 0.
    """
    mappings = _as_mappings(comps)
    if element_order is None:
        element_order = sorted({e for c in mappings for e in c})
    element_order = tuple(element_order)
    y = np.asarray(energies, dtype=np.float64)
    if len(y) != len(mappings):
        raise ArgumentError(f"{len(mappings)} compositions for {len(y)} energies")
    if not np.all(np.isfinite(y)):
        raise DataError("non-finite energies")
    design = np.column_stack([np.ones(len(y)), composition_matrix(mappings, element_order)])
    # checked before rank reduction, which would otherwise always "succeed" on too few rows
    if len(y) < design.shape[1]:
        raise DataError(f"{len(y)} structures cannot determine {design.shape[1]} parameters")
    kept = _independent_columns(design)
    dropped = tuple(element_order[c - 1] for c in range(1, design.shape[1]) if c not in kept)
    if dropped:
        warnings.warn(f"rank-deficient composition columns dropped: {', '.join(dropped)}")
    q, r = np.linalg.qr(design[:, kept])
    coef = solve_triangular(r, q.T @ y)
    full = np.zeros(design.shape[1])
    full[kept] = coef
    resid = y - design @ full
    return LinearCompositionalFit(full[1:], float(full[0]), float(np.sqrt(np.mean(resid**2))),
                                  len(y), element_order, dropped)


def deviations(energies, fit: LinearCompositionalFit, comps) -> np.ndarray:
    """Energy minus the compositional baseline prediction."""
    return np.asarray(energies, dtype=np.float64) - fit.predict(comps)


@dataclass
class EnergyTable:
    ids: list
    compositions: list
    e_true: np.ndarray
    predictions: dict = field(default_factory=dict)

    def __post_init__(self):
        self.e_true = np.asarray(self.e_true, dtype=np.float64)
        n = len(self.ids)
        if len(self.compositions) != n or len(self.e_true) != n:
            raise FormatError("energy table columns have different lengths")
        self.predictions = {k: np.asarray(v, dtype=np.float64) for k, v in self.predictions.items()}
        for name, v in self.predictions.items():
            if len(v) != n:
                raise FormatError(f"model column {name!r} has {len(v)} rows, expected {n}")
            if not np.all(np.isfinite(v)):
                raise DataError(f"model column {name!r} has non-finite energies")
        if not np.all(np.isfinite(self.e_true)):
            raise DataError("e_true has non-finite energies")

    @property
    def element_order(self) -> tuple:
        return tuple(sorted({e for c in self.compositions for e in c}))

    def take(self, indices) -> "EnergyTable":
        idx = list(indices)
        return EnergyTable([self.ids[i] for i in idx], [self.compositions[i] for i in idx],
                           self.e_true[idx], {k: v[idx] for k, v in self.predictions.items()})


def load_energy_table(path) -> EnergyTable:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(line for line in fh if not line.startswith("#"))
        fields = reader.fieldnames or []
        for col in ("id", "composition", "e_true"):
            if col not in fields:
                raise FormatError(f"{path}: missing column {col!r}")
        models = [f for f in fields if f not in ("id", "composition", "e_true")]
        ids, comps, e_true, preds = [], [], [], {m: [] for m in models}
        for lineno, row in enumerate(reader, start=2):
            try:
                ids.append(row["id"])
                comps.append(parse_composition(row["composition"]))
                e_true.append(float(row["e_true"]))
                for m in models:
                    preds[m].append(float(row[m]))
            except (TypeError, ValueError) as exc:
                raise FormatError(f"{path}: row {lineno}: {exc}") from None
    if not ids:
        raise DataError(f"{path}: no structures")
    return EnergyTable(ids, comps, e_true, preds)


def energy_regression_mae(table: EnergyTable, model: str, details: bool = False):
    """Mean |dE_true - dE_model| after each side subtracts its own compositional fit."""
    if model not in table.predictions:
        raise ArgumentError(f"no predictions for model {model!r}")
    order = table.element_order
    fit_true = fit_linear_compositional(table.compositions, table.e_true, order)
    fit_model = fit_linear_compositional(table.compositions, table.predictions[model], order)
    d_true = deviations(table.e_true, fit_true, table.compositions)
    d_model = deviations(table.predictions[model], fit_model, table.compositions)
    mae = float(np.mean(np.abs(d_true - d_model)))
    if details:
        return mae, fit_true, fit_model
    return mae
