import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from neshfs.data import FeatureSchema, encode_typed_frame, split
from neshfs.evaluator import EvalRecord
from neshfs.scoring import FeatureScore, RankedFeatures


def make_ranked(n_num: int, n_cat: int) -> RankedFeatures:
    """Ranked lists with strictly decreasing synthetic scores; names follow
    rank order (n1 outranks n2, c01 outranks c02, ...)."""
    return RankedFeatures(
        numerical=tuple(
            FeatureScore(f"n{r}", "numerical", float(1000 - r), r)
            for r in range(1, n_num + 1)),
        categorical=tuple(
            FeatureScore(f"c{r:02d}", "categorical", float(1000 - r), r)
            for r in range(1, n_cat + 1)),
    )


def stub_evaluator(table, by="counts"):
    """Evaluator replaying a fixed AUC per subset, keyed by (n_num, n_cat)
    counts or by total size."""
    def evaluate(subset):
        key = subset.counts if by == "counts" else subset.size
        return EvalRecord(
            subset_key="", n_numerical=0, n_categorical=0,
            kept_numerical=(), kept_categorical=(),
            auc=table[key], logloss=0.0, train_time_s=0.0, epochs_run=0)
    return evaluate


def synthetic_frame(n_rows: int, seed: int, n_noise: int = 10) -> pd.DataFrame:
    """Click data with a known generative model: 3 informative numerical
    columns, 4 informative categorical columns, and ``n_noise`` categorical
    columns independent of the label."""
    rng = np.random.default_rng(seed)
    data = {}
    logit = np.full(n_rows, -0.3)

    num_weights = (2.4, -1.8, 1.2)
    for idx, weight in enumerate(num_weights, start=1):
        col = rng.uniform(0.0, 1.0, n_rows)
        data[f"inf_n{idx}"] = col
        logit += weight * (col - 0.5)

    cat_vocab = (6, 8, 5, 7)
    for idx, vocab in enumerate(cat_vocab, start=1):
        ids = rng.integers(0, vocab, n_rows)
        effects = rng.normal(0.0, 0.8, vocab)
        data[f"inf_c{idx}"] = np.array([f"v{v}" for v in ids])
        logit += effects[ids]

    for idx in range(1, n_noise + 1):
        ids = rng.integers(0, 40, n_rows)
        data[f"noise_c{idx:02d}"] = np.array([f"z{v}" for v in ids])

    prob = 1.0 / (1.0 + np.exp(-logit))
    data["click"] = (rng.uniform(size=n_rows) < prob).astype(int)
    return pd.DataFrame(data)


def synthetic_schema_dict(n_noise: int = 10) -> dict:
    return {
        "label": "click",
        "numerical": [f"inf_n{i}" for i in range(1, 4)],
        "categorical": ([f"inf_c{i}" for i in range(1, 5)]
                        + [f"noise_c{i:02d}" for i in range(1, n_noise + 1)]),
        "ignored": [],
        "missing_token": "",
    }


def write_synthetic_csv(directory: Path, n_rows: int, seed: int) -> tuple[Path, Path]:
    """Materialize the synthetic dataset and its schema file; returns
    (csv_path, schema_path)."""
    frame = synthetic_frame(n_rows, seed)
    csv_path = directory / f"synthetic_{n_rows}_{seed}.csv"
    frame.to_csv(csv_path, index=False)
    schema_path = directory / "synthetic_schema.json"
    schema_path.write_text(json.dumps(synthetic_schema_dict()), encoding="utf-8")
    return csv_path, schema_path


@pytest.fixture
def small_dataset():
    """Encoded + split synthetic dataset small enough for fast training."""
    frame = synthetic_frame(600, seed=5, n_noise=2)
    schema = FeatureSchema(
        label_column="click",
        numerical=tuple(f"inf_n{i}" for i in range(1, 4)),
        categorical=tuple([f"inf_c{i}" for i in range(1, 5)]
                          + [f"noise_c{i:02d}" for i in range(1, 3)]))
    return split(encode_typed_frame(frame, schema), (0.8, 0.1, 0.1), seed=5)
