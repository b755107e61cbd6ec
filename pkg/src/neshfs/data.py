"""CSV ingestion: schema-declared columns, label encoding, sampling, splits.

A dataset is described by a :class:`FeatureSchema` (which column is the
label, which are numerical, which are categorical) and materialized as an
:class:`EncodedDataset`: categorical values label-encoded to integer ids
with id 0 reserved for missing, numerical values min-max scaled to [0, 1].
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd

TRAIN, VAL, TEST = 0, 1, 2


class SchemaError(ValueError):
    """Schema file is malformed or inconsistent with the data."""


class IngestError(ValueError):
    """CSV contents violate the declared schema."""


@dataclass(frozen=True)
class FeatureSchema:
    """Column roles for one dataset.

    The label, numerical, categorical, and ignored groups must be pairwise
    disjoint; together they are the only columns the pipeline reads.
    """

    label_column: str
    numerical: tuple[str, ...] = ()
    categorical: tuple[str, ...] = ()
    ignored: tuple[str, ...] = ()
    missing_token: str = ""

    def __post_init__(self):
        object.__setattr__(self, "numerical", tuple(self.numerical))
        object.__setattr__(self, "categorical", tuple(self.categorical))
        object.__setattr__(self, "ignored", tuple(self.ignored))
        if not self.label_column:
            raise SchemaError("label column is required")
        for kind, cols in (("numerical", self.numerical),
                           ("categorical", self.categorical),
                           ("ignored", self.ignored)):
            if len(set(cols)) != len(cols):
                raise SchemaError(f"duplicate column in {kind} list")
        groups = {
            "label": {self.label_column},
            "numerical": set(self.numerical),
            "categorical": set(self.categorical),
            "ignored": set(self.ignored),
        }
        names = list(groups)
        for a in range(len(names)):
            for b in range(a + 1, len(names)):
                overlap = groups[names[a]] & groups[names[b]]
                if overlap:
                    raise SchemaError(
                        f"column(s) {sorted(overlap)} assigned to both "
                        f"{names[a]} and {names[b]}")

    @property
    def feature_columns(self) -> tuple[str, ...]:
        return self.numerical + self.categorical

    @property
    def all_columns(self) -> tuple[str, ...]:
        return (self.label_column,) + self.feature_columns + self.ignored


def load_schema(path: str | Path) -> FeatureSchema:
    """Read a schema JSON file (keys: label, numerical, categorical, ignored,
    missing_token) and validate it."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise SchemaError(f"cannot read schema file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"schema file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict) or "label" not in raw:
        raise SchemaError(f"schema file {path} must be an object with a 'label' key")
    return FeatureSchema(
        label_column=raw["label"],
        numerical=tuple(raw.get("numerical", ())),
        categorical=tuple(raw.get("categorical", ())),
        ignored=tuple(raw.get("ignored", ())),
        missing_token=raw.get("missing_token", ""),
    )


@dataclass(frozen=True)
class EncodedDataset:
    """Immutable encoded table: binary label, scaled numericals, id-encoded
    categoricals, and a train/val/test row assignment.

    Until :func:`split` is applied every row is assigned to the train split.
    """

    schema: FeatureSchema
    label: np.ndarray                       # (n,) int8 in {0, 1}
    numerical_matrix: np.ndarray            # (n, n_num) float64 in [0, 1]
    categorical_matrix: np.ndarray          # (n, n_cat) int64, id 0 = missing
    vocab_sizes: dict[str, int] = field(default_factory=dict)
    split_assignment: np.ndarray = None     # (n,) int8 in {TRAIN, VAL, TEST}

    @property
    def row_count(self) -> int:
        return int(self.label.shape[0])

    def numerical_column(self, name: str) -> np.ndarray:
        return self.numerical_matrix[:, self.schema.numerical.index(name)]

    def categorical_column(self, name: str) -> np.ndarray:
        return self.categorical_matrix[:, self.schema.categorical.index(name)]

    def split_indices(self, which: int) -> np.ndarray:
        return np.flatnonzero(self.split_assignment == which)


def _encode_categorical(values: pd.Series, missing_token: str) -> tuple[np.ndarray, int]:
    # First-occurrence encoding; id 0 reserved for the missing token.
    codes, uniques = pd.factorize(values.where(values != missing_token),
                                  use_na_sentinel=True)
    return (codes + 1).astype(np.int64), len(uniques) + 1


def _encode_numerical(values: pd.Series, missing_token: str, column: str) -> np.ndarray:
    present = values != missing_token
    parsed = pd.to_numeric(values.where(present), errors="coerce")
    bad = parsed.isna() & present
    if bad.any():
        offender = values[bad].iloc[0]
        raise IngestError(
            f"non-numeric value {offender!r} in numerical column {column!r}")
    out = parsed.fillna(0.0).to_numpy(dtype=np.float64)  # missing -> 0
    if not np.all(np.isfinite(out)):
        raise IngestError(f"non-finite value in numerical column {column!r}")
    lo, hi = out.min(), out.max()
    if hi > lo:
        return (out - lo) / (hi - lo)
    return np.zeros_like(out)  # constant column scales to 0


def _encode_label(values: pd.Series, missing_token: str, column: str) -> np.ndarray:
    parsed = pd.to_numeric(values, errors="coerce")
    bad = parsed.isna() | ~parsed.isin((0.0, 1.0))
    if bad.any():
        offender = values[bad].iloc[0]
        raise IngestError(f"label {offender!r} in column {column!r} is not 0 or 1")
    return parsed.to_numpy(dtype=np.int8)


def encode_frame(frame: pd.DataFrame, schema: FeatureSchema) -> EncodedDataset:
    """Encode an in-memory string frame under the schema (no sampling)."""
    missing = [c for c in (schema.label_column,) + schema.feature_columns
               if c not in frame.columns]
    if missing:
        raise IngestError(f"columns missing from input: {missing}")
    if len(frame) == 0:
        raise IngestError("input has no data rows")

    label = _encode_label(frame[schema.label_column], schema.missing_token,
                          schema.label_column)
    num_cols = [_encode_numerical(frame[c], schema.missing_token, c)
                for c in schema.numerical]
    numerical = (np.column_stack(num_cols) if num_cols
                 else np.empty((len(frame), 0), dtype=np.float64))
    vocab_sizes: dict[str, int] = {}
    cat_cols = []
    for c in schema.categorical:
        ids, vocab = _encode_categorical(frame[c], schema.missing_token)
        cat_cols.append(ids)
        vocab_sizes[c] = vocab
    categorical = (np.column_stack(cat_cols) if cat_cols
                   else np.empty((len(frame), 0), dtype=np.int64))

    return EncodedDataset(
        schema=schema,
        label=label,
        numerical_matrix=numerical,
        categorical_matrix=categorical,
        vocab_sizes=vocab_sizes,
        split_assignment=np.full(len(frame), TRAIN, dtype=np.int8),
    )


def encode_typed_frame(frame: pd.DataFrame, schema: FeatureSchema) -> EncodedDataset:
    """Encode an already-typed frame: NaN/None play the role of the missing
    token, numerical columns must be numeric dtype."""
    missing = [c for c in (schema.label_column,) + schema.feature_columns
               if c not in frame.columns]
    if missing:
        raise IngestError(f"columns missing from input: {missing}")
    if len(frame) == 0:
        raise IngestError("input has no data rows")

    raw_label = frame[schema.label_column].to_numpy()
    if not np.isin(raw_label, (0, 1)).all():
        raise IngestError(f"label column {schema.label_column!r} must be 0/1")
    label = raw_label.astype(np.int8)

    num_cols = []
    for c in schema.numerical:
        col = pd.to_numeric(frame[c], errors="raise").to_numpy(dtype=np.float64)
        col = np.where(np.isnan(col), 0.0, col)
        if not np.all(np.isfinite(col)):
            raise IngestError(f"non-finite value in numerical column {c!r}")
        lo, hi = col.min(), col.max()
        num_cols.append((col - lo) / (hi - lo) if hi > lo else np.zeros_like(col))
    numerical = (np.column_stack(num_cols) if num_cols
                 else np.empty((len(frame), 0), dtype=np.float64))

    vocab_sizes: dict[str, int] = {}
    cat_cols = []
    for c in schema.categorical:
        codes, uniques = pd.factorize(frame[c], use_na_sentinel=True)
        cat_cols.append((codes + 1).astype(np.int64))  # NaN code -1 -> id 0
        vocab_sizes[c] = len(uniques) + 1
    categorical = (np.column_stack(cat_cols) if cat_cols
                   else np.empty((len(frame), 0), dtype=np.int64))

    return EncodedDataset(
        schema=schema,
        label=label,
        numerical_matrix=numerical,
        categorical_matrix=categorical,
        vocab_sizes=vocab_sizes,
        split_assignment=np.full(len(frame), TRAIN, dtype=np.int8),
    )


def ingest(csv_path: str | Path, schema: FeatureSchema,
           sample_n: int | None = None, seed: int = 0) -> EncodedDataset:
    """Load a CSV under the schema, optionally downsampling to ``sample_n``
    rows uniformly without replacement (seeded)."""
    csv_path = Path(csv_path)
    # Everything is read as text so the missing token is matched literally.
    frame = pd.read_csv(csv_path, dtype=str, keep_default_na=False,
                        na_filter=False)
    if len(frame) == 0:
        raise IngestError(f"{csv_path} has no data rows")
    if sample_n is not None and sample_n < len(frame):
        rng = np.random.default_rng(seed)
        keep = np.sort(rng.choice(len(frame), size=sample_n, replace=False))
        frame = frame.iloc[keep].reset_index(drop=True)
    return encode_frame(frame, schema)


def split(dataset: EncodedDataset, ratios: tuple[float, float, float],
          seed: int = 0) -> EncodedDataset:
    """Assign rows to train/val/test by a seeded shuffle.

    Boundary rounding keeps every split within one row of its exact
    proportion.
    """
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ValueError(f"ratios must be three positive numbers, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")
    n = dataset.row_count
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    cut1 = int(round(n * ratios[0]))
    cut2 = int(round(n * (ratios[0] + ratios[1])))
    assignment = np.empty(n, dtype=np.int8)
    assignment[order[:cut1]] = TRAIN
    assignment[order[cut1:cut2]] = VAL
    assignment[order[cut2:]] = TEST
    return replace(dataset, split_assignment=assignment)
