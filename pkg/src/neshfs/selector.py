"""Scikit-learn style front end for the subset search.

``NeshfsSelector`` wraps the whole pipeline (encode, split, rank, search)
behind the usual fit/transform surface so it drops into sklearn pipelines
and model-selection tooling.
"""

from __future__ import annotations

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .data import FeatureSchema, encode_typed_frame, split
from .evaluator import TrainConfig, make_evaluator
from .scoring import rank_features
from .search import SearchParams, run_neshfs

LABEL = "__label__"


class NeshfsSelector(TransformerMixin, BaseEstimator):
    """Feature selection by ranked removal plus neighborhood refinement.

    Parameters
    ----------
    categorical : list of column names (DataFrame input) or column indices
        (array input) to treat as categorical. By default, object/category
        dtype columns of a DataFrame are categorical and everything else is
        numerical; plain arrays default to all-numerical.
    i, j : removal step sizes for categorical / numerical features.
    u, d, k : neighborhood budgets and the number of refined subsets.
    min_total : down-search floor on the subset size.
    model_kind : "logistic", "fm", or "fm_mlp" internal evaluator.
    split_ratios : train/validation/test fractions used while searching.
    random_state : seed for sampling, splitting, and training.

    Attributes
    ----------
    support_ : boolean mask over input columns, True for kept features.
    selected_features_ : names of the kept columns.
    ranking_ : the scored, ranked feature lists.
    best_record_ : metrics of the winning subset.
    ledger_ : every evaluated subset with its metrics.
    """

    def __init__(self, categorical=None, i=5, j=3, u=3, d=3, k=3,
                 min_total=3, model_kind="logistic", batch_size=256,
                 patience=3, max_epochs=50, learning_rate=1e-3,
                 embedding_dim=8, l2=1e-6, split_ratios=(0.8, 0.1, 0.1),
                 random_state=0):
        self.categorical = categorical
        self.i = i
        self.j = j
        self.u = u
        self.d = d
        self.k = k
        self.min_total = min_total
        self.model_kind = model_kind
        self.batch_size = batch_size
        self.patience = patience
        self.max_epochs = max_epochs
        self.learning_rate = learning_rate
        self.embedding_dim = embedding_dim
        self.l2 = l2
        self.split_ratios = split_ratios
        self.random_state = random_state

    def _as_frame(self, X) -> pd.DataFrame:
        if isinstance(X, pd.DataFrame):
            return X
        X = np.asarray(X)
        if X.ndim != 2:
            raise ValueError(f"expected a 2d input, got shape {X.shape}")
        return pd.DataFrame(X, columns=[f"x{idx}" for idx in range(X.shape[1])])

    def _categorical_names(self, frame: pd.DataFrame) -> list[str]:
        if self.categorical is None:
            return [c for c in frame.columns
                    if frame[c].dtype == object
                    or isinstance(frame[c].dtype, pd.CategoricalDtype)]
        names = []
        for item in self.categorical:
            if isinstance(item, (int, np.integer)):
                names.append(frame.columns[item])
            elif item in frame.columns:
                names.append(item)
            else:
                raise ValueError(f"unknown categorical column {item!r}")
        return names

    def fit(self, X, y):
        frame = self._as_frame(X)
        y = np.asarray(y)
        if y.shape[0] != len(frame):
            raise ValueError("X and y have different numbers of rows")
        if not np.isin(y, (0, 1)).all():
            raise ValueError("y must be binary 0/1")

        categorical = self._categorical_names(frame)
        numerical = [c for c in frame.columns if c not in categorical]
        schema = FeatureSchema(label_column=LABEL,
                               numerical=tuple(numerical),
                               categorical=tuple(categorical))
        full = frame.copy()
        full[LABEL] = y
        dataset = split(encode_typed_frame(full, schema),
                        tuple(self.split_ratios), seed=self.random_state)

        self.ranking_ = rank_features(dataset)
        params = SearchParams(i=self.i, j=self.j, u=self.u, d=self.d,
                              k=self.k, min_total=self.min_total)
        config = TrainConfig(batch_size=self.batch_size,
                             patience=self.patience,
                             max_epochs=self.max_epochs,
                             learning_rate=self.learning_rate,
                             embedding_dim=self.embedding_dim,
                             l2=self.l2, seed=self.random_state,
                             model_kind=self.model_kind)
        best, ledger = run_neshfs(self.ranking_, params,
                                  make_evaluator(dataset, config))

        kept = set(best.kept_numerical) | set(best.kept_categorical)
        self.feature_names_in_ = np.asarray(list(frame.columns), dtype=object)
        self.n_features_in_ = len(frame.columns)
        self.support_ = np.array([c in kept for c in frame.columns])
        self.selected_features_ = tuple(c for c in frame.columns if c in kept)
        self.best_subset_ = best
        self.best_record_ = ledger.get(best.key)
        self.ledger_ = ledger
        return self

    def _check_fitted(self):
        if not hasattr(self, "support_"):
            raise NotFittedError("this NeshfsSelector instance is not fitted")

    def get_support(self, indices: bool = False) -> np.ndarray:
        self._check_fitted()
        return np.flatnonzero(self.support_) if indices else self.support_

    def transform(self, X):
        self._check_fitted()
        if isinstance(X, pd.DataFrame):
            missing = [c for c in self.selected_features_ if c not in X.columns]
            if missing:
                raise ValueError(f"columns missing from input: {missing}")
            return X[list(self.selected_features_)]
        X = np.asarray(X)
        if X.ndim != 2 or X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"expected {self.n_features_in_} columns, got {X.shape}")
        return X[:, self.support_]
