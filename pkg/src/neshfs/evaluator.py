"""Lightweight CTR evaluators: the fitness oracle behind every search.

Given a feature subset, an encoded dataset, and a :class:`TrainConfig`,
:func:`train_and_eval` trains a small model by seeded mini-batch SGD with
early stopping on validation logloss and reports test AUC, test logloss,
and wall time as an :class:`EvalRecord`.

Three model kinds are built in:

* ``logistic``  sigmoid(w0 + sum of linear terms)
* ``fm``        adds pairwise inner products of field embeddings, computed
                with the square-of-sums identity
                0.5 * (|sum_f e_f|^2 - sum_f |e_f|^2)
* ``fm_mlp``    adds a two-layer perceptron (64, 32, ReLU) over the
                concatenated field embeddings

Each kept categorical feature owns an embedding table and a per-id linear
weight; each kept numerical feature owns a scalar linear weight and (for
fm / fm_mlp) an embedding vector scaled by the feature value. Any callable
with the same (subset, dataset, config) -> EvalRecord shape can stand in
for :func:`train_and_eval`, so richer models plug into the search unchanged.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable

import numpy as np

from .data import TEST, TRAIN, VAL, EncodedDataset
from .metrics import auc as auc_score
from .metrics import logloss as logloss_score

if TYPE_CHECKING:
    from .search import FeatureSubset

MODEL_KINDS = ("logistic", "fm", "fm_mlp")
MLP_WIDTHS = (64, 32)
INIT_SCALE = 0.01


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int):
        super().__init__(f"non-finite loss at epoch {epoch}")
        self.epoch = epoch


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 256
    patience: int = 3
    max_epochs: int = 50
    learning_rate: float = 1e-3
    embedding_dim: int = 8
    l2: float = 1e-6
    seed: int = 0
    model_kind: str = "fm"

    def __post_init__(self):
        if self.batch_size < 1 or self.patience < 1 or self.max_epochs < 1:
            raise ValueError("batch_size, patience, and max_epochs must be >= 1")
        if self.embedding_dim < 1:
            raise ValueError("embedding_dim must be >= 1")
        if self.learning_rate <= 0 or self.l2 < 0:
            raise ValueError("learning_rate must be > 0 and l2 >= 0")
        if self.model_kind not in MODEL_KINDS:
            raise ValueError(f"model_kind must be one of {MODEL_KINDS}")


@dataclass
class EvalRecord:
    """Metrics for one evaluated subset; one ledger entry."""

    subset_key: str
    n_numerical: int
    n_categorical: int
    kept_numerical: tuple[str, ...]
    kept_categorical: tuple[str, ...]
    auc: float
    logloss: float
    train_time_s: float
    epochs_run: int
    tag: str = ""

    @property
    def n_features(self) -> int:
        return self.n_numerical + self.n_categorical


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _softplus(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


class FieldModel:
    """Parameter layout, forward pass, and analytic gradients for one
    (subset, model_kind) pair.

    Field order is numerical features first, then categorical, both in
    kept (rank) order. Batches arrive as pre-sliced value/id matrices.
    """

    def __init__(self, numerical_names, categorical_names, vocab_sizes,
                 config: TrainConfig):
        self.numerical_names = tuple(numerical_names)
        self.categorical_names = tuple(categorical_names)
        self.vocabs = [vocab_sizes[c] for c in self.categorical_names]
        self.dim = config.embedding_dim
        self.kind = config.model_kind
        self.l2 = config.l2
        self.n_fields = len(self.numerical_names) + len(self.categorical_names)

    # -- parameters -----------------------------------------------------

    def init_params(self, rng: np.random.Generator) -> dict[str, np.ndarray]:
        k = self.dim
        params: dict[str, np.ndarray] = {"bias": np.zeros(())}
        if self.numerical_names:
            params["lin_num"] = np.zeros(len(self.numerical_names))
        for name, vocab in zip(self.categorical_names, self.vocabs):
            params[f"lin/{name}"] = np.zeros(vocab)
        if self.kind in ("fm", "fm_mlp"):
            if self.numerical_names:
                params["emb_num"] = rng.uniform(
                    -INIT_SCALE, INIT_SCALE, (len(self.numerical_names), k))
            for name, vocab in zip(self.categorical_names, self.vocabs):
                params[f"emb/{name}"] = rng.uniform(
                    -INIT_SCALE, INIT_SCALE, (vocab, k))
        if self.kind == "fm_mlp":
            d_in = self.n_fields * k
            h1, h2 = MLP_WIDTHS
            params["mlp_w1"] = rng.uniform(-INIT_SCALE, INIT_SCALE, (d_in, h1))
            params["mlp_b1"] = np.zeros(h1)
            params["mlp_w2"] = rng.uniform(-INIT_SCALE, INIT_SCALE, (h1, h2))
            params["mlp_b2"] = np.zeros(h2)
            params["mlp_w3"] = rng.uniform(-INIT_SCALE, INIT_SCALE, h2)
            params["mlp_b3"] = np.zeros(())
        return params

    # -- forward --------------------------------------------------------

    def _embeddings(self, params, num_vals, cat_ids) -> np.ndarray:
        """Field embedding stack, shape (batch, n_fields, dim)."""
        parts = []
        if self.numerical_names:
            parts.append(params["emb_num"][None, :, :] * num_vals[:, :, None])
        for f, name in enumerate(self.categorical_names):
            parts.append(params[f"emb/{name}"][cat_ids[:, f]][:, None, :])
        return np.concatenate(parts, axis=1)

    def logits(self, params, num_vals, cat_ids) -> np.ndarray:
        z = np.full(num_vals.shape[0], float(params["bias"]))
        if self.numerical_names:
            z += num_vals @ params["lin_num"]
        for f, name in enumerate(self.categorical_names):
            z += params[f"lin/{name}"][cat_ids[:, f]]
        if self.kind == "logistic":
            return z
        emb = self._embeddings(params, num_vals, cat_ids)
        total = emb.sum(axis=1)
        z += 0.5 * ((total ** 2).sum(axis=1) - (emb ** 2).sum(axis=(1, 2)))
        if self.kind == "fm_mlp":
            flat = emb.reshape(emb.shape[0], -1)
            h1 = np.maximum(flat @ params["mlp_w1"] + params["mlp_b1"], 0.0)
            h2 = np.maximum(h1 @ params["mlp_w2"] + params["mlp_b2"], 0.0)
            z += h2 @ params["mlp_w3"] + float(params["mlp_b3"])
        return z

    def predict(self, params, num_vals, cat_ids) -> np.ndarray:
        return sigmoid(self.logits(params, num_vals, cat_ids))

    def _l2_penalty(self, params, cat_ids) -> float:
        """L2 on weights active in the batch; biases are not regularized."""
        if self.l2 == 0.0:
            return 0.0
        total = 0.0
        for key in ("lin_num", "emb_num", "mlp_w1", "mlp_w2", "mlp_w3"):
            if key in params:
                total += (params[key] ** 2).sum()
        for f, name in enumerate(self.categorical_names):
            active = np.unique(cat_ids[:, f])
            total += (params[f"lin/{name}"][active] ** 2).sum()
            if f"emb/{name}" in params:
                total += (params[f"emb/{name}"][active] ** 2).sum()
        return 0.5 * self.l2 * float(total)

    def batch_loss(self, params, num_vals, cat_ids, y) -> float:
        """Mean cross-entropy from logits plus the L2 penalty."""
        z = self.logits(params, num_vals, cat_ids)
        bce = float(np.mean(_softplus(z) - y * z))
        return bce + self._l2_penalty(params, cat_ids)

    # -- backward -------------------------------------------------------

    def loss_and_grads(self, params, num_vals, cat_ids, y):
        """Analytic gradients of :meth:`batch_loss`, dense per parameter."""
        batch = num_vals.shape[0]
        k = self.dim
        grads = {key: np.zeros_like(val) for key, val in params.items()}

        z = np.full(batch, float(params["bias"]))
        if self.numerical_names:
            z += num_vals @ params["lin_num"]
        for f, name in enumerate(self.categorical_names):
            z += params[f"lin/{name}"][cat_ids[:, f]]
        emb = total = flat = h1 = h2 = pre1 = pre2 = None
        if self.kind != "logistic":
            emb = self._embeddings(params, num_vals, cat_ids)
            total = emb.sum(axis=1)
            z += 0.5 * ((total ** 2).sum(axis=1) - (emb ** 2).sum(axis=(1, 2)))
        if self.kind == "fm_mlp":
            flat = emb.reshape(batch, -1)
            pre1 = flat @ params["mlp_w1"] + params["mlp_b1"]
            h1 = np.maximum(pre1, 0.0)
            pre2 = h1 @ params["mlp_w2"] + params["mlp_b2"]
            h2 = np.maximum(pre2, 0.0)
            z += h2 @ params["mlp_w3"] + float(params["mlp_b3"])

        bce = float(np.mean(_softplus(z) - y * z))
        dz = (sigmoid(z) - y) / batch

        grads["bias"] += dz.sum()
        if self.numerical_names:
            grads["lin_num"] += num_vals.T @ dz
        n_num = len(self.numerical_names)
        for f, name in enumerate(self.categorical_names):
            np.add.at(grads[f"lin/{name}"], cat_ids[:, f], dz)

        if self.kind != "logistic":
            # d(pairwise)/d(e_f) = total - e_f
            demb = dz[:, None, None] * (total[:, None, :] - emb)
            if self.kind == "fm_mlp":
                dmlp = dz
                grads["mlp_b3"] += dmlp.sum()
                grads["mlp_w3"] += h2.T @ dmlp
                dh2 = np.outer(dmlp, params["mlp_w3"]) * (pre2 > 0)
                grads["mlp_b2"] += dh2.sum(axis=0)
                grads["mlp_w2"] += h1.T @ dh2
                dh1 = (dh2 @ params["mlp_w2"].T) * (pre1 > 0)
                grads["mlp_b1"] += dh1.sum(axis=0)
                grads["mlp_w1"] += flat.T @ dh1
                demb += (dh1 @ params["mlp_w1"].T).reshape(batch, self.n_fields, k)
            if self.numerical_names:
                grads["emb_num"] += np.einsum(
                    "bfk,bf->fk", demb[:, :n_num, :], num_vals)
            for f, name in enumerate(self.categorical_names):
                np.add.at(grads[f"emb/{name}"], cat_ids[:, f],
                          demb[:, n_num + f, :])

        if self.l2 > 0.0:
            for key in ("lin_num", "emb_num", "mlp_w1", "mlp_w2", "mlp_w3"):
                if key in params:
                    grads[key] += self.l2 * params[key]
            for f, name in enumerate(self.categorical_names):
                active = np.unique(cat_ids[:, f])
                grads[f"lin/{name}"][active] += self.l2 * params[f"lin/{name}"][active]
                if f"emb/{name}" in params:
                    grads[f"emb/{name}"][active] += self.l2 * params[f"emb/{name}"][active]

        return bce + self._l2_penalty(params, cat_ids), grads


@dataclass
class EarlyStopResult:
    best_state: object
    best_val: float
    best_epoch: int
    epochs_run: int
    val_history: list = field(default_factory=list)


def fit_with_early_stopping(run_epoch: Callable[[int], float],
                            snapshot: Callable[[], object],
                            patience: int, max_epochs: int) -> EarlyStopResult:
    """Run ``run_epoch(epoch)`` (1-based) until validation loss has not
    strictly improved for ``patience`` consecutive epochs, keeping a
    snapshot of the best-epoch state.
    """
    best_val = math.inf
    best_state = None
    best_epoch = 0
    streak = 0
    history: list[float] = []
    epoch = 0
    for epoch in range(1, max_epochs + 1):
        val = run_epoch(epoch)
        if not math.isfinite(val):
            raise DivergenceError(epoch)
        history.append(val)
        if val < best_val:
            best_val = val
            best_state = snapshot()
            best_epoch = epoch
            streak = 0
        else:
            streak += 1
        if streak >= patience:
            break
    return EarlyStopResult(best_state, best_val, best_epoch, epoch, history)


@dataclass
class FittedModel:
    model: FieldModel
    params: dict[str, np.ndarray]
    epochs_run: int
    best_epoch: int
    val_history: list

    def predict(self, num_vals, cat_ids) -> np.ndarray:
        return self.model.predict(self.params, num_vals, cat_ids)


def _subset_columns(subset, dataset: EncodedDataset):
    num_idx = [dataset.schema.numerical.index(n) for n in subset.kept_numerical]
    cat_idx = [dataset.schema.categorical.index(c) for c in subset.kept_categorical]
    num_vals = dataset.numerical_matrix[:, num_idx]
    cat_ids = dataset.categorical_matrix[:, cat_idx]
    return num_vals, cat_ids


def fit_model(subset, dataset: EncodedDataset, config: TrainConfig) -> FittedModel:
    """Train one model on the subset's columns; returns the best-epoch
    parameters together with the early-stopping trace."""
    if len(subset.kept_numerical) + len(subset.kept_categorical) == 0:
        raise ValueError("cannot train on an empty feature subset")
    num_vals, cat_ids = _subset_columns(subset, dataset)
    splits = {name: dataset.split_indices(which)
              for name, which in (("train", TRAIN), ("val", VAL), ("test", TEST))}
    for name, idx in splits.items():
        if idx.size == 0:
            raise ValueError(f"dataset has an empty {name} split")

    model = FieldModel(subset.kept_numerical, subset.kept_categorical,
                       dataset.vocab_sizes, config)
    rng = np.random.default_rng(config.seed)
    params = model.init_params(rng)
    train_idx = splits["train"]
    val_idx = splits["val"]
    y = dataset.label.astype(np.float64)

    def run_epoch(_epoch: int) -> float:
        order = rng.permutation(train_idx)
        for start in range(0, order.size, config.batch_size):
            rows = order[start:start + config.batch_size]
            loss, grads = model.loss_and_grads(
                params, num_vals[rows], cat_ids[rows], y[rows])
            if not math.isfinite(loss):
                raise DivergenceError(_epoch)
            for key, grad in grads.items():
                params[key] -= config.learning_rate * grad
        val_pred = model.predict(params, num_vals[val_idx], cat_ids[val_idx])
        return logloss_score(val_pred, y[val_idx])

    result = fit_with_early_stopping(
        run_epoch, snapshot=lambda: {k: v.copy() for k, v in params.items()},
        patience=config.patience, max_epochs=config.max_epochs)
    return FittedModel(model, result.best_state, result.epochs_run,
                       result.best_epoch, result.val_history)


def train_and_eval(subset, dataset: EncodedDataset,
                   config: TrainConfig) -> EvalRecord:
    """Train on the subset and score the test split. Wall time covers
    training plus test evaluation."""
    start = time.monotonic()
    fitted = fit_model(subset, dataset, config)
    num_vals, cat_ids = _subset_columns(subset, dataset)
    test_idx = dataset.split_indices(TEST)
    pred = fitted.predict(num_vals[test_idx], cat_ids[test_idx])
    y_test = dataset.label[test_idx]
    record = EvalRecord(
        subset_key=subset.key,
        n_numerical=len(subset.kept_numerical),
        n_categorical=len(subset.kept_categorical),
        kept_numerical=tuple(subset.kept_numerical),
        kept_categorical=tuple(subset.kept_categorical),
        auc=auc_score(pred, y_test),
        logloss=logloss_score(pred, y_test.astype(np.float64)),
        train_time_s=time.monotonic() - start,
        epochs_run=fitted.epochs_run,
    )
    return record


def make_evaluator(dataset: EncodedDataset, config: TrainConfig):
    """Bind dataset and config into the (subset) -> EvalRecord callable the
    search engines consume."""
    def evaluator(subset) -> EvalRecord:
        return train_and_eval(subset, dataset, config)
    return evaluator
