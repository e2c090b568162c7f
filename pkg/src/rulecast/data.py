"""Tabular dataset loading, mode imputation and cross-validation split plans.

Datasets are column stores: every column is numeric (float64) or categorical
(integer codes into a category list, stored as float64).  Missing entries are
NaN for numeric columns and -1 for categorical ones; `impute_mode` replaces
missing categorical entries with the column mode and rejects missing numeric
entries.
"""
from __future__ import annotations

import configparser
import csv
import hashlib
import json
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import DataError
from .rng import TAG_SPLIT_PLAN, derived_rng

NUMERIC = "numeric"
CATEGORICAL = "categorical"
MISSING_TOKENS = ("", "?")


@dataclass(frozen=True)
class FeatureColumn:
    """One typed column of length N.

    `values` holds floats for numeric columns and category codes (as floats)
    for categorical ones.  Missing entries are NaN (numeric) or -1
    (categorical); `categories` maps codes to their original string labels.
    """

    name: str
    kind: str
    values: np.ndarray
    categories: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise DataError(f"column {self.name!r}: unknown kind {self.kind!r}")
        vals = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", vals)
        if self.kind == NUMERIC:
            present = vals[~np.isnan(vals)]
            if present.size and not np.all(np.isfinite(present)):
                raise DataError(f"column {self.name!r}: non-finite numeric value")
        else:
            if not self.categories:
                raise DataError(f"column {self.name!r}: categorical without categories")
            codes = vals[vals >= 0]
            if codes.size and (np.any(codes != np.floor(codes)) or codes.max() >= len(self.categories)):
                raise DataError(f"column {self.name!r}: category code out of range")

    @property
    def missing_mask(self) -> np.ndarray:
        if self.kind == NUMERIC:
            return np.isnan(self.values)
        return self.values < 0

    def take(self, indices: np.ndarray) -> "FeatureColumn":
        return replace(self, values=self.values[indices])

    def equals(self, other: "FeatureColumn") -> bool:
        return (
            self.name == other.name
            and self.kind == other.kind
            and self.categories == other.categories
            and np.array_equal(self.values, other.values, equal_nan=True)
        )


@dataclass(frozen=True)
class Dataset:
    """Feature columns of equal length plus binary labels (1 = positive class)."""

    name: str
    columns: tuple[FeatureColumn, ...]
    labels: np.ndarray
    positive_name: str = "positive"
    negative_name: str = "negative"

    def __post_init__(self) -> None:
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "columns", tuple(self.columns))
        n = labels.shape[0]
        if n == 0:
            raise DataError("dataset has no samples")
        for col in self.columns:
            if col.values.shape[0] != n:
                raise DataError(f"column {col.name!r} length {col.values.shape[0]} != {n}")
        if not set(np.unique(labels)) <= {0, 1}:
            raise DataError("labels must be 0/1")
        # single-class label vectors are allowed here: fold views and pure
        # subsets are Datasets too; loading and split planning enforce that
        # full datasets carry both classes

    @property
    def n_samples(self) -> int:
        return self.labels.shape[0]

    @property
    def n_features(self) -> int:
        return len(self.columns)

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    @property
    def kinds(self) -> tuple[str, ...]:
        return tuple(c.kind for c in self.columns)

    def column_categories(self) -> tuple[tuple[str, ...], ...]:
        return tuple(c.categories for c in self.columns)

    def has_missing(self) -> bool:
        return any(c.missing_mask.any() for c in self.columns)

    def matrix(self) -> np.ndarray:
        """N x D float64 matrix; categorical columns appear as their codes."""
        return np.column_stack([c.values for c in self.columns])

    def subset(self, indices: np.ndarray) -> "Dataset":
        indices = np.asarray(indices)
        return replace(
            self,
            columns=tuple(c.take(indices) for c in self.columns),
            labels=self.labels[indices],
        )

    def equals(self, other: "Dataset") -> bool:
        return (
            self.name == other.name
            and len(self.columns) == len(other.columns)
            and all(a.equals(b) for a, b in zip(self.columns, other.columns))
            and np.array_equal(self.labels, other.labels)
        )


def dataset_from_arrays(
    X,
    y,
    kinds: "tuple[str, ...] | None" = None,
    name: str = "array",
    feature_names: "tuple[str, ...] | None" = None,
    categories: "dict[int, tuple[str, ...]] | None" = None,
) -> Dataset:
    """Wrap a plain feature matrix as a Dataset (numeric columns by default).

    Categorical columns must already hold integer codes; their category labels
    default to the code strings.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y)
    d = X.shape[1]
    kinds = kinds or (NUMERIC,) * d
    names = feature_names or tuple(f"x{j}" for j in range(d))
    cols = []
    for j in range(d):
        if kinds[j] == CATEGORICAL:
            if categories and j in categories:
                cats = categories[j]
            else:
                top = int(X[:, j].max()) if X.shape[0] else 0
                cats = tuple(str(c) for c in range(top + 1))
            cols.append(FeatureColumn(names[j], CATEGORICAL, X[:, j], cats))
        else:
            cols.append(FeatureColumn(names[j], NUMERIC, X[:, j]))
    return Dataset(name=name, columns=tuple(cols), labels=y)


# ---------------------------------------------------------------------------
# Schema manifests
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DatasetSchema:
    """Declared column kinds and label encoding for one CSV layout.

    `positive_values` / `negative_values` are the raw label strings mapped to
    class 1 / class 0.  When `negative_values` is empty the label column must
    contain exactly two distinct values and everything that is not positive
    becomes the negative class.
    """

    name: str
    label_column: str
    positive_values: tuple[str, ...]
    negative_values: tuple[str, ...]
    positive_name: str
    negative_name: str
    column_kinds: tuple[tuple[str, str], ...]  # (column name, kind), CSV order

    def fingerprint(self) -> str:
        payload = json.dumps(
            {
                "name": self.name,
                "label": self.label_column,
                "positive": list(self.positive_values),
                "negative": list(self.negative_values),
                "columns": [list(c) for c in self.column_kinds],
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def parse_schema(text: str, name_hint: str = "dataset") -> DatasetSchema:
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keep column-name case
    parser.read_string(text)
    if "dataset" not in parser or "columns" not in parser:
        raise DataError("schema needs [dataset] and [columns] sections")
    ds = parser["dataset"]
    pos = tuple(v.strip() for v in ds.get("positive_values", ds.get("positive_value", "")).split(",") if v.strip())
    neg = tuple(v.strip() for v in ds.get("negative_values", "").split(",") if v.strip())
    if not pos:
        raise DataError("schema must declare positive_value(s)")
    label_column = ds.get("label_column", "").strip()
    if not label_column:
        raise DataError("schema must declare label_column")
    cols = []
    for col, kind in parser["columns"].items():
        kind = kind.strip().lower()
        if kind not in (NUMERIC, CATEGORICAL):
            raise DataError(f"schema column {col!r}: kind must be numeric or categorical")
        cols.append((col, kind))
    if not cols:
        raise DataError("schema declares no feature columns")
    return DatasetSchema(
        name=ds.get("name", name_hint).strip(),
        label_column=label_column,
        positive_values=pos,
        negative_values=neg,
        positive_name=ds.get("positive_name", "positive").strip(),
        negative_name=ds.get("negative_name", "negative").strip(),
        column_kinds=tuple(cols),
    )


def load_schema(path) -> DatasetSchema:
    """Read a schema manifest from a file path or a bundled schema name."""
    p = Path(path)
    if p.exists():
        return parse_schema(p.read_text(), name_hint=p.stem)
    bundled = resources.files("rulecast").joinpath(f"schemas/{path}.schema")
    if bundled.is_file():
        return parse_schema(bundled.read_text(), name_hint=str(path))
    raise DataError(f"schema not found: {path}")


def bundled_schema_names() -> tuple[str, ...]:
    root = resources.files("rulecast").joinpath("schemas")
    return tuple(sorted(f.name[: -len(".schema")] for f in root.iterdir() if f.name.endswith(".schema")))


# ---------------------------------------------------------------------------
# CSV loading
# ---------------------------------------------------------------------------

def load_csv(path, schema: DatasetSchema) -> Dataset:
    """Load an RFC-4180 CSV (UTF-8, header row) against a schema.

    Empty cells and "?" mark missing values.  The label column is encoded to
    {0, 1} via the schema's declared positive/negative values.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataError(f"{path}: empty file") from None
            rows = [r for r in reader if r]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc

    header = [h.strip() for h in header]
    if len(rows) < 2:
        raise DataError(f"{path}: fewer than 2 data rows")
    width = len(header)
    for i, row in enumerate(rows):
        if len(row) != width:
            raise DataError(f"{path}: row {i + 2} has {len(row)} cells, expected {width}")

    col_pos = {name: j for j, name in enumerate(header)}
    if schema.label_column not in col_pos:
        raise DataError(f"{path}: label column {schema.label_column!r} absent")
    for name, _ in schema.column_kinds:
        if name not in col_pos:
            raise DataError(f"{path}: column {name!r} declared in schema but absent")

    labels = _encode_labels([row[col_pos[schema.label_column]].strip() for row in rows], schema, path)

    columns = []
    for name, kind in schema.column_kinds:
        raw = [row[col_pos[name]].strip() for row in rows]
        if kind == NUMERIC:
            vals = np.empty(len(raw))
            for i, cell in enumerate(raw):
                if cell in MISSING_TOKENS:
                    vals[i] = np.nan
                else:
                    try:
                        vals[i] = float(cell)
                    except ValueError:
                        raise DataError(
                            f"{path}: row {i + 2}, column {name!r}: unparseable numeric cell {cell!r}"
                        ) from None
            columns.append(FeatureColumn(name, NUMERIC, vals))
        else:
            present = sorted({c for c in raw if c not in MISSING_TOKENS})
            if not present:
                raise DataError(f"{path}: column {name!r} is entirely missing")
            code_of = {c: k for k, c in enumerate(present)}
            vals = np.array([code_of.get(c, -1) if c not in MISSING_TOKENS else -1 for c in raw], dtype=np.float64)
            columns.append(FeatureColumn(name, CATEGORICAL, vals, tuple(present)))

    return Dataset(
        name=schema.name,
        columns=tuple(columns),
        labels=labels,
        positive_name=schema.positive_name,
        negative_name=schema.negative_name,
    )


def _encode_labels(raw: list[str], schema: DatasetSchema, path) -> np.ndarray:
    distinct = sorted(set(raw))
    pos = set(schema.positive_values)
    if schema.negative_values:
        neg = set(schema.negative_values)
        unknown = [v for v in distinct if v not in pos | neg]
        if unknown:
            raise DataError(f"{path}: label value(s) {unknown} not covered by schema mapping")
    else:
        if len(distinct) != 2:
            raise DataError(
                f"{path}: label column has {len(distinct)} distinct values, expected 2 "
                f"(declare an explicit negative_values mapping otherwise)"
            )
        if not pos & set(distinct):
            raise DataError(f"{path}: declared positive value never occurs in label column")
        neg = set(distinct) - pos
    labels = np.array([1 if v in pos else 0 for v in raw], dtype=np.int64)
    if labels.min() == labels.max():
        raise DataError(f"{path}: label column maps to a single class")
    return labels


# ---------------------------------------------------------------------------
# Imputation
# ---------------------------------------------------------------------------

def impute_mode(dataset: Dataset) -> Dataset:
    """Replace missing categorical entries by the column mode.

    Ties break toward the smallest category code.  Missing numeric entries are
    rejected: the reference protocol only imputes categorical variables.
    """
    new_cols = []
    for col in dataset.columns:
        mask = col.missing_mask
        if not mask.any():
            new_cols.append(col)
            continue
        if col.kind == NUMERIC:
            raise DataError(f"column {col.name!r}: missing numeric entries are not imputable")
        present = col.values[~mask].astype(np.int64)
        if present.size == 0:
            raise DataError(f"column {col.name!r}: entirely missing")
        counts = np.bincount(present, minlength=len(col.categories))
        mode_code = int(np.argmax(counts))  # argmax takes the smallest code on ties
        vals = col.values.copy()
        vals[mask] = mode_code
        new_cols.append(replace(col, values=vals))
    return replace(dataset, columns=tuple(new_cols))


# ---------------------------------------------------------------------------
# Cross-validation split plans
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SplitPlan:
    """Fold assignments for repeated stratified cross-validation.

    `assignments[r, i]` is the fold index of sample i in repeat r.
    """

    repeats: int
    folds: int
    assignments: np.ndarray
    seed: int

    def test_indices(self, repeat: int, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments[repeat] == fold)

    def train_indices(self, repeat: int, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments[repeat] != fold)

    def cells(self):
        for r in range(self.repeats):
            for f in range(self.folds):
                yield r, f


def stratified_fold_indices(labels: np.ndarray, folds: int, rng: np.random.Generator) -> np.ndarray:
    """Per-sample fold index with class-proportional allocation.

    Each class is shuffled and dealt into folds; leftover samples rotate
    through the folds so totals stay as even as possible.
    """
    labels = np.asarray(labels)
    assign = np.empty(labels.shape[0], dtype=np.int64)
    offset = 0
    for cls in (1, 0):
        idx = np.flatnonzero(labels == cls)
        rng.shuffle(idx)
        base, rem = divmod(idx.size, folds)
        counts = np.full(folds, base, dtype=np.int64)
        for k in range(rem):
            counts[(offset + k) % folds] += 1
        assign[idx] = np.repeat(np.arange(folds), counts)
        offset = (offset + rem) % folds
    return assign


def make_split_plan(dataset: Dataset, repeats: int, folds: int, seed: int) -> SplitPlan:
    """Deterministic repeated stratified fold assignment for a dataset.

    Classes smaller than `folds` are spread over as many folds as they have
    members, which leaves some folds without that class; `run_experiment`
    rejects such plans, but plan construction itself permits them.
    """
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    if dataset.n_samples < folds:
        raise DataError("fewer samples than folds")
    if dataset.labels.min() == dataset.labels.max():
        raise DataError("dataset labels contain a single class")
    assignments = np.empty((repeats, dataset.n_samples), dtype=np.int64)
    for r in range(repeats):
        rng = derived_rng(seed, TAG_SPLIT_PLAN, r)
        assignments[r] = stratified_fold_indices(dataset.labels, folds, rng)
    return SplitPlan(repeats=repeats, folds=folds, assignments=assignments, seed=seed)
