"""Embedding containers, row normalization, file formats and subsampling."""
from __future__ import annotations

import csv
import io
import json
import math
import struct
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .errors import ArgumentError, DataError, FormatError
from .rng import Xoshiro256

EMB_MAGIC = b"EMB1"
PROVENANCE_TAG = "# repalign-provenance: "


class ZeroRowWarning(UserWarning):
    """Rows that are identically zero were left unscaled."""


@dataclass(frozen=True)
class EmbeddingSet:
    """One model's embeddings of N shared items (row i is item i).

    ``zero_rows`` is the tally of all-zero rows seen by the last call to
    :func:`normalize_rows`; ``baseline`` marks random-baseline models.
    """

    model_name: str
    values: np.ndarray
    item_ids: Optional[tuple] = None
    normalized: bool = False
    baseline: bool = False
    zero_rows: int = 0

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim != 2:
            raise FormatError(f"{self.model_name}: expected a 2-D matrix, got shape {values.shape}")
        if values.shape[1] < 1:
            raise FormatError(f"{self.model_name}: embedding dimension must be >= 1")
        bad = np.argwhere(~np.isfinite(values))
        if len(bad):
            r, c = bad[0]
            raise DataError(f"{self.model_name}: non-finite value at row {r}, column {c}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.item_ids is not None:
            ids = tuple(str(i) for i in self.item_ids)
            if len(ids) != values.shape[0]:
                raise FormatError(
                    f"{self.model_name}: {len(ids)} item ids for {values.shape[0]} rows"
                )
            object.__setattr__(self, "item_ids", ids)

    @property
    def n_items(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def take(self, indices) -> "EmbeddingSet":
        indices = np.asarray(indices, dtype=np.int64)
        ids = None if self.item_ids is None else tuple(self.item_ids[i] for i in indices)
        return replace(self, values=self.values[indices], item_ids=ids)


def check_aligned(*sets: EmbeddingSet) -> int:
    """Enforce that row i means the same item in every set; return N."""
    if not sets:
        raise ArgumentError("no embedding sets given")
    n = sets[0].n_items
    for s in sets[1:]:
        if s.n_items != n:
            raise ArgumentError(
                f"item count mismatch: {sets[0].model_name} has {n}, {s.model_name} has {s.n_items}"
            )
    with_ids = [s for s in sets if s.item_ids is not None]
    for s in with_ids[1:]:
        if s.item_ids != with_ids[0].item_ids:
            raise ArgumentError(
                f"item ids of {s.model_name} do not match {with_ids[0].model_name}"
            )
    return n


def normalize_rows(s: EmbeddingSet) -> EmbeddingSet:
    """Scale every row so its largest absolute entry is 1.

    Zero rows are kept as they are and counted in ``zero_rows``.
    """
    x = s.values
    scale = np.abs(x).max(axis=1)
    zero = scale == 0
    n_zero = int(zero.sum())
    if n_zero:
        warnings.warn(f"{s.model_name}: {n_zero} all-zero rows left unscaled", ZeroRowWarning)
    scale = np.where(zero, 1.0, scale)
    return replace(s, values=x / scale[:, None], normalized=True, zero_rows=n_zero)


def ensure_normalized(s: EmbeddingSet) -> EmbeddingSet:
    if s.normalized:
        return s
    warnings.warn(f"{s.model_name}: embeddings were not normalized; applying row max-abs scaling")
    return normalize_rows(s)


def subsample_indices(n_items: int, n: int, seed: int) -> np.ndarray:
    if n < 0 or n > n_items:
        raise ArgumentError(f"cannot subsample {n} of {n_items} items")
    return Xoshiro256(seed).choice(n_items, n)


def subsample(s: EmbeddingSet, n: int, seed: int) -> EmbeddingSet:
    """Seeded uniform selection of ``n`` rows without replacement.

    The chosen indices depend only on ``(n_items, n, seed)``, so aligned sets
    stay aligned when subsampled with the same arguments.
    """
    return s.take(subsample_indices(s.n_items, n, seed))


# --- embedding files -------------------------------------------------------

def _infer_format(path: Path, fmt: Optional[str]) -> str:
    if fmt is None:
        fmt = path.suffix.lstrip(".").lower()
    if fmt not in ("csv", "emb"):
        raise ArgumentError(f"unknown embedding format {fmt!r}; expected csv or emb")
    return fmt


def parse_csv_embeddings(text: str, name: str = "embeddings") -> np.ndarray:
    rows = []
    width = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = stripped.split(",")
        try:
            row = [float(v) for v in fields]
        except ValueError as exc:
            raise FormatError(f"{name}: line {lineno}: {exc}") from None
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise FormatError(
                f"{name}: ragged row at line {lineno}: {len(row)} values, expected {width}"
            )
        rows.append(row)
    if not rows:
        raise DataError(f"{name}: no embeddings found")
    return np.array(rows, dtype=np.float64)


def load_embeddings(path, format: Optional[str] = None, name: Optional[str] = None) -> EmbeddingSet:
    path = Path(path)
    fmt = _infer_format(path, format)
    if fmt == "csv":
        values = parse_csv_embeddings(path.read_text(encoding="utf-8"), str(path))
        return EmbeddingSet(name or path.stem, values)
    raw = path.read_bytes()
    if len(raw) == 0:
        raise DataError(f"{path}: empty file")
    if raw[:4] != EMB_MAGIC or len(raw) < 8:
        raise FormatError(f"{path}: missing EMB1 magic")
    (hlen,) = struct.unpack("<I", raw[4:8])
    try:
        header = json.loads(raw[8 : 8 + hlen].decode("utf-8"))
        n, d, dtype = int(header["n"]), int(header["d"]), header["dtype"]
    except (ValueError, KeyError, UnicodeDecodeError) as exc:
        raise FormatError(f"{path}: bad EMB header: {exc}") from None
    if header.get("order", "row-major") != "row-major":
        raise FormatError(f"{path}: unsupported order {header['order']!r}")
    np_dtype = {"f32": "<f4", "f64": "<f8"}.get(dtype)
    if np_dtype is None:
        raise FormatError(f"{path}: unsupported dtype {dtype!r}")
    payload = raw[8 + hlen :]
    if len(payload) != n * d * np.dtype(np_dtype).itemsize:
        raise FormatError(f"{path}: payload holds {len(payload)} bytes, header promises {n}x{d} {dtype}")
    if n == 0:
        raise DataError(f"{path}: no embeddings found")
    values = np.frombuffer(payload, dtype=np_dtype).reshape(n, d).astype(np.float64)
    return EmbeddingSet(
        name or header.get("name", path.stem),
        values,
        item_ids=header.get("item_ids"),
        baseline=bool(header.get("baseline", False)),
    )


def save_embeddings(s: EmbeddingSet, path, dtype: str = "f64", provenance: Optional[dict] = None) -> None:
    path = Path(path)
    fmt = _infer_format(path, None)
    if fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            if provenance is not None:
                fh.write(PROVENANCE_TAG + json.dumps(provenance, sort_keys=True) + "\n")
            for row in s.values:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
        return
    np_dtype = {"f32": "<f4", "f64": "<f8"}.get(dtype)
    if np_dtype is None:
        raise ArgumentError(f"unsupported dtype {dtype!r}")
    header = {"name": s.model_name, "n": s.n_items, "d": s.dim, "dtype": dtype, "order": "row-major"}
    if s.item_ids is not None:
        header["item_ids"] = list(s.item_ids)
    if s.baseline:
        header["baseline"] = True
    if provenance is not None:
        header["provenance"] = provenance
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(EMB_MAGIC)
        fh.write(struct.pack("<I", len(hbytes)))
        fh.write(hbytes)
        fh.write(np.ascontiguousarray(s.values, dtype=np_dtype).tobytes())


# --- alignment matrices ----------------------------------------------------

METRICS = ("cknna", "cka", "dcor", "ii-forward")


@dataclass
class AlignmentMatrix:
    """Model-by-model metric values. Missing cells hold NaN and a reason."""

    model_names: list
    values: np.ndarray
    metric: str
    params: dict = field(default_factory=dict)
    symmetric: bool = True
    missing: dict = field(default_factory=dict)
    baselines: list = field(default_factory=list)

    def __post_init__(self):
        self.model_names = [str(n) for n in self.model_names]
        self.values = np.asarray(self.values, dtype=np.float64)
        m = len(self.model_names)
        if self.values.shape != (m, m):
            raise ArgumentError(f"matrix shape {self.values.shape} does not match {m} model names")
        if len(set(self.model_names)) != m:
            raise ArgumentError("duplicate model names")

    def index(self, name: str) -> int:
        try:
            return self.model_names.index(name)
        except ValueError:
            raise ArgumentError(f"unknown model {name!r}") from None

    def metadata(self) -> dict:
        return {
            "tool": "repalign",
            "version": __version__,
            "metric": self.metric,
            "params": self.params,
            "symmetric": self.symmetric,
            "baselines": list(self.baselines),
            "missing": {f"{i},{j}": r for (i, j), r in sorted(self.missing.items())},
        }


def _fmt(v: float) -> str:
    return "" if math.isnan(v) else repr(float(v))


def save_matrix(m: AlignmentMatrix, path, format: Optional[str] = None) -> None:
    path = Path(path)
    fmt = format or path.suffix.lstrip(".").lower()
    if fmt == "csv":
        buf = io.StringIO()
        buf.write(PROVENANCE_TAG + json.dumps(m.metadata(), sort_keys=True) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["model", *m.model_names])
        for name, row in zip(m.model_names, m.values):
            w.writerow([name, *(_fmt(v) for v in row)])
        text = buf.getvalue()
    elif fmt == "json":
        doc = m.metadata()
        doc["model_names"] = m.model_names
        doc["values"] = [[None if math.isnan(v) else float(v) for v in row] for row in m.values]
        text = json.dumps(doc, sort_keys=True, indent=1) + "\n"
    else:
        raise ArgumentError(f"unknown matrix format {fmt!r}; expected csv or json")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _missing_from_meta(meta: dict) -> dict:
    out = {}
    for key, reason in meta.get("missing", {}).items():
        i, j = key.split(",")
        out[(int(i), int(j))] = reason
    return out


def load_matrix(path, format: Optional[str] = None) -> AlignmentMatrix:
    path = Path(path)
    fmt = format or path.suffix.lstrip(".").lower()
    text = path.read_text(encoding="utf-8")
    if fmt == "json":
        try:
            doc = json.loads(text)
            names = doc["model_names"]
            values = [[math.nan if v is None else float(v) for v in row] for row in doc["values"]]
        except (ValueError, KeyError, TypeError) as exc:
            raise FormatError(f"{path}: bad matrix JSON: {exc}") from None
        meta = doc
    elif fmt == "csv":
        meta = {}
        lines = []
        for line in text.splitlines():
            if line.startswith(PROVENANCE_TAG):
                meta = json.loads(line[len(PROVENANCE_TAG) :])
            elif line.strip() and not line.startswith("#"):
                lines.append(line)
        rows = list(csv.reader(lines))
        if not rows:
            raise FormatError(f"{path}: empty matrix file")
        names = rows[0][1:]
        if len(rows) - 1 != len(names):
            raise FormatError(f"{path}: {len(rows) - 1} rows for {len(names)} columns")
        values = []
        for r, row in enumerate(rows[1:]):
            if len(row) != len(names) + 1 or row[0] != names[r]:
                raise FormatError(f"{path}: row {r + 1} does not match the header")
            try:
                values.append([math.nan if v == "" else float(v) for v in row[1:]])
            except ValueError as exc:
                raise FormatError(f"{path}: row {r + 1}: {exc}") from None
    else:
        raise ArgumentError(f"unknown matrix format {fmt!r}; expected csv or json")
    return AlignmentMatrix(
        names,
        np.array(values, dtype=np.float64).reshape(len(names), len(names)),
        metric=meta.get("metric", "unknown"),
        params=meta.get("params", {}),
        symmetric=meta.get("symmetric", True),
        missing=_missing_from_meta(meta),
        baselines=meta.get("baselines", []),
    )
