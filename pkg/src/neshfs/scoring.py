"""Univariate relevance scores and the ranked feature lists they induce.

Categorical features are scored with the Pearson chi-square statistic of
their value-by-label contingency table; numerical features with the one-way
ANOVA F statistic between the two label groups. Each kind is ranked
independently, highest score first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import TRAIN, EncodedDataset, FeatureSchema

# Stand-in for an infinite F statistic (zero within-group variance with
# separated means); sorts ahead of every attainable finite score.
MAX_SCORE = float(np.finfo(np.float64).max)


@dataclass(frozen=True)
class FeatureScore:
    name: str
    kind: str        # "numerical" | "categorical"
    score: float
    rank: int        # 1-based within its kind


@dataclass(frozen=True)
class RankedFeatures:
    """Score-descending feature lists, one per kind."""

    numerical: tuple[FeatureScore, ...]
    categorical: tuple[FeatureScore, ...]

    @property
    def numerical_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.numerical)

    @property
    def categorical_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.categorical)


def chi_square_score(column: np.ndarray, labels: np.ndarray) -> float:
    """Pearson chi-square statistic of the value x label contingency table.

    Sums (observed - expected)^2 / expected over cells with positive
    expected count. Degenerate tables (a single distinct value, or a single
    label class) score 0.
    """
    column = np.asarray(column)
    labels = np.asarray(labels)
    if column.shape != labels.shape:
        raise ValueError("column and labels must have equal length")
    if column.size == 0:
        raise ValueError("empty input")
    values, value_idx = np.unique(column, return_inverse=True)
    classes, class_idx = np.unique(labels, return_inverse=True)
    if len(values) < 2 or len(classes) < 2:
        return 0.0
    observed = np.zeros((len(values), len(classes)))
    np.add.at(observed, (value_idx, class_idx), 1.0)
    row_totals = observed.sum(axis=1, keepdims=True)
    col_totals = observed.sum(axis=0, keepdims=True)
    expected = row_totals * col_totals / column.size
    mask = expected > 0
    return float((((observed - expected) ** 2)[mask] / expected[mask]).sum())


def anova_f_score(column: np.ndarray, labels: np.ndarray) -> float:
    """One-way ANOVA F statistic between the two label groups.

    F = (SSB / (k-1)) / (SSW / (n-k)) with k = 2. Equal group means give 0;
    zero within-group variance with distinct means gives ``MAX_SCORE``.
    """
    column = np.asarray(column, dtype=np.float64)
    labels = np.asarray(labels)
    if column.shape != labels.shape:
        raise ValueError("column and labels must have equal length")
    n = column.size
    if n < 3:
        raise ValueError(f"need at least 3 samples, got {n}")
    group0 = column[labels == 0]
    group1 = column[labels == 1]
    if group0.size == 0 or group1.size == 0:
        raise ValueError("both label classes must be present")
    grand_mean = column.mean()
    ssb = (group0.size * (group0.mean() - grand_mean) ** 2
           + group1.size * (group1.mean() - grand_mean) ** 2)
    ssw = (((group0 - group0.mean()) ** 2).sum()
           + ((group1 - group1.mean()) ** 2).sum())
    if ssb == 0.0:
        return 0.0
    if ssw == 0.0:
        return MAX_SCORE
    return float((ssb / 1.0) / (ssw / (n - 2)))


def _rank(names, scores, kind) -> tuple[FeatureScore, ...]:
    # Descending score, ties broken by ascending name.
    order = sorted(range(len(names)), key=lambda i: (-scores[i], names[i]))
    return tuple(
        FeatureScore(name=names[i], kind=kind, score=scores[i], rank=pos + 1)
        for pos, i in enumerate(order))


def rank_features(dataset: EncodedDataset, schema: FeatureSchema | None = None) -> RankedFeatures:
    """Score every schema feature on the training split and rank each kind
    by descending score."""
    schema = schema or dataset.schema
    rows = dataset.split_indices(TRAIN)
    labels = dataset.label[rows]
    num_scores = [anova_f_score(dataset.numerical_column(c)[rows], labels)
                  for c in schema.numerical]
    cat_scores = [chi_square_score(dataset.categorical_column(c)[rows], labels)
                  for c in schema.categorical]
    return RankedFeatures(
        numerical=_rank(list(schema.numerical), num_scores, "numerical"),
        categorical=_rank(list(schema.categorical), cat_scores, "categorical"),
    )
