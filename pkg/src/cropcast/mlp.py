"""Feed-forward production model: splits, normalization, training, RMSE.

The network is a plain multilayer perceptron trained by mini-batch gradient
descent with backpropagation, written out by hand so every weight update is
a pure function of (data, hyperparameters, seed). Matmuls go through
np.einsum rather than BLAS: reduction order is then fixed, which keeps two
same-seed runs bit-identical regardless of thread count.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatchError,
    DivergenceError,
    EmptyDatasetError,
    EmptyInputError,
    LengthMismatchError,
)
from .features import FeatureDataset

ACTIVATIONS = ("relu", "tanh")


@dataclass(frozen=True)
class SplitSpec:
    """Train/validation/test fractions plus the shuffle seed."""

    train_frac: float = 0.7
    val_frac: float = 0.15
    test_frac: float = 0.15
    seed: int = 0

    def __post_init__(self):
        for name, frac in (
            ("train_frac", self.train_frac),
            ("val_frac", self.val_frac),
            ("test_frac", self.test_frac),
        ):
            if not 0.0 < frac < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {frac}")
        total = self.train_frac + self.val_frac + self.test_frac
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"fractions must sum to 1, got {total}")


def split_dataset(ds: FeatureDataset, spec: SplitSpec):
    """Shuffle by seed and cut into (train, val, test).

    Validation and test get floor(n * frac) rows each; the remainder goes
    to train, so the three parts always cover the dataset exactly.
    """
    n = ds.n_samples
    if n == 0:
        raise EmptyDatasetError("cannot split an empty dataset")
    perm = np.random.default_rng(spec.seed).permutation(n)
    n_val = int(math.floor(n * spec.val_frac))
    n_test = int(math.floor(n * spec.test_frac))
    n_train = n - n_val - n_test
    train = ds.take(perm[:n_train])
    val = ds.take(perm[n_train : n_train + n_val])
    test = ds.take(perm[n_train + n_val :])
    return train, val, test


@dataclass(frozen=True)
class NormStats:
    """Z-score statistics fitted on a training set.

    ``feature_names`` lists the kept columns in order; ``dropped`` records
    constant columns removed before training. Target stats use 1.0 for the
    std when the training targets are constant, so denormalization stays
    defined.
    """

    feature_names: tuple[str, ...]
    feature_mean: np.ndarray
    feature_std: np.ndarray
    dropped: tuple[str, ...]
    y_mean: float
    y_std: float

    def __post_init__(self):
        object.__setattr__(self, "feature_mean", np.asarray(self.feature_mean, dtype=np.float64))
        object.__setattr__(self, "feature_std", np.asarray(self.feature_std, dtype=np.float64))
        if self.feature_mean.shape != (len(self.feature_names),):
            raise ValueError("feature_mean length does not match feature_names")
        if self.feature_std.shape != (len(self.feature_names),):
            raise ValueError("feature_std length does not match feature_names")
        if (self.feature_std <= 0.0).any() or self.y_std <= 0.0:
            raise ValueError("normalization stds must be positive")


def _column_indices(ds: FeatureDataset, names) -> list[int]:
    lookup = {name: i for i, name in enumerate(ds.feature_names)}
    missing = [name for name in names if name not in lookup]
    if missing:
        raise DimensionMismatchError(f"dataset lacks features {missing}")
    return [lookup[name] for name in names]


def normalize(ds: FeatureDataset, stats: NormStats | None = None):
    """Z-score features and target; returns (normalized dataset, stats).

    With ``stats=None`` the statistics are fitted on ``ds`` (population
    std); constant columns are dropped with a warning and recorded. With
    stored stats the same affine map is applied to new data, using no new
    statistics.
    """
    if stats is None:
        if ds.n_samples == 0:
            raise EmptyDatasetError("cannot fit normalization on an empty dataset")
        mean = ds.X.mean(axis=0)
        std = ds.X.std(axis=0)
        keep = std > 0.0
        dropped = tuple(n for n, k in zip(ds.feature_names, keep) if not k)
        if dropped:
            warnings.warn(f"dropping constant features {list(dropped)}", stacklevel=2)
        if ds.y is not None and ds.n_samples > 0:
            y_mean = float(ds.y.mean())
            y_std = float(ds.y.std())
        else:
            y_mean, y_std = 0.0, 1.0
        if y_std == 0.0:
            y_std = 1.0
        stats = NormStats(
            feature_names=tuple(n for n, k in zip(ds.feature_names, keep) if k),
            feature_mean=mean[keep],
            feature_std=std[keep],
            dropped=dropped,
            y_mean=y_mean,
            y_std=y_std,
        )
    cols = _column_indices(ds, stats.feature_names)
    Xn = (ds.X[:, cols] - stats.feature_mean) / stats.feature_std
    yn = None if ds.y is None else (ds.y - stats.y_mean) / stats.y_std
    out = FeatureDataset(
        feature_names=list(stats.feature_names),
        X=Xn,
        y=yn,
        pixel_index=ds.pixel_index.copy(),
    )
    return out, stats


def denormalize_targets(stats: NormStats, y_norm) -> np.ndarray:
    return np.asarray(y_norm, dtype=np.float64) * stats.y_std + stats.y_mean


@dataclass(frozen=True)
class MlpHyper:
    hidden_sizes: tuple[int, ...] = (32, 32)
    activation: str = "relu"
    learning_rate: float = 1e-3
    batch_size: int = 32
    patience: int = 20
    max_epochs: int = 500

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if any(h < 1 for h in self.hidden_sizes):
            raise ValueError("hidden layer sizes must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")


def hyper_from_mapping(data: dict) -> MlpHyper:
    """Build hyperparameters from a parsed TOML/JSON table."""
    allowed = {
        "hidden_sizes",
        "activation",
        "learning_rate",
        "batch_size",
        "patience",
        "max_epochs",
    }
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ValueError(f"unknown hyperparameter keys {unknown}")
    kwargs = dict(data)
    if "hidden_sizes" in kwargs:
        kwargs["hidden_sizes"] = tuple(kwargs["hidden_sizes"])
    return MlpHyper(**kwargs)


@dataclass
class MlpModel:
    """Trained network plus the normalization needed to apply it.

    ``layer_sizes`` chains input width through hidden layers to the single
    output; ``weights[i]`` has shape (layer_sizes[i], layer_sizes[i+1]).
    """

    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str
    norm_stats: NormStats
    seed: int
    train_log: list[dict] = field(default_factory=list)

    def __post_init__(self):
        if self.layer_sizes[-1] != 1:
            raise ValueError("output layer must have width 1")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        if len(self.weights) != len(self.layer_sizes) - 1 or len(self.biases) != len(self.weights):
            raise ValueError("weight/bias count does not chain the layer sizes")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            want = (self.layer_sizes[i], self.layer_sizes[i + 1])
            if w.shape != want:
                raise ValueError(f"weight {i} has shape {w.shape}, expected {want}")
            if b.shape != (self.layer_sizes[i + 1],):
                raise ValueError(f"bias {i} has shape {b.shape}")


def _act(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _act_grad(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return (z > 0.0).astype(np.float64)
    t = np.tanh(z)
    return 1.0 - t * t


def _forward(weights, biases, X, activation):
    """Forward pass; returns (pre-activations per layer, activations per layer)."""
    a = X
    zs = []
    acts = [a]
    last = len(weights) - 1
    for i, (w, b) in enumerate(zip(weights, biases)):
        z = np.einsum("bi,io->bo", a, w) + b
        zs.append(z)
        a = z if i == last else _act(z, activation)
        acts.append(a)
    return zs, acts


def _loss_and_grads(weights, biases, X, y, activation):
    """Mean-squared error over the batch and its analytic gradients."""
    n = X.shape[0]
    zs, acts = _forward(weights, biases, X, activation)
    pred = acts[-1][:, 0]
    resid = pred - y
    loss = float(np.mean(resid * resid))
    delta = (2.0 / n) * resid[:, None]
    g_w = [None] * len(weights)
    g_b = [None] * len(weights)
    for i in range(len(weights) - 1, -1, -1):
        g_w[i] = np.einsum("bi,bo->io", acts[i], delta)
        g_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = np.einsum("bo,io->bi", delta, weights[i]) * _act_grad(zs[i - 1], activation)
    return loss, g_w, g_b


def _init_params(layer_sizes, rng):
    weights = []
    biases = []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out, dtype=np.float64))
    return weights, biases


def _predict_normalized(weights, biases, X, activation) -> np.ndarray:
    _, acts = _forward(weights, biases, X, activation)
    return acts[-1][:, 0]


def train_mlp(
    train: FeatureDataset,
    val: FeatureDataset,
    hyper: MlpHyper = MlpHyper(),
    seed: int = 0,
) -> MlpModel:
    """Fit the network on ``train``, early-stopping on ``val`` RMSE.

    Normalization statistics come from the training set only. The returned
    model carries the parameters from the epoch with the best validation
    RMSE (training RMSE when ``val`` is empty), never the last epoch's.
    """
    if train.n_samples == 0:
        raise EmptyDatasetError("training split is empty")
    if train.y is None:
        raise ValueError("training split has no targets")
    if val.n_samples > 0 and val.y is None:
        raise ValueError("validation split has no targets")

    train_n, stats = normalize(train)
    if not stats.feature_names:
        raise EmptyDatasetError("every feature is constant; nothing to train on")
    val_n, _ = normalize(val, stats) if val.n_samples > 0 else (None, stats)

    X, y = train_n.X, train_n.y
    layer_sizes = (X.shape[1], *hyper.hidden_sizes, 1)
    rng = np.random.default_rng(seed)
    weights, biases = _init_params(layer_sizes, rng)

    best_w = [w.copy() for w in weights]
    best_b = [b.copy() for b in biases]
    best_score = math.inf
    since_best = 0
    log: list[dict] = []
    n = X.shape[0]

    for epoch in range(hyper.max_epochs):
        perm = rng.permutation(n)
        for start in range(0, n, hyper.batch_size):
            batch = perm[start : start + hyper.batch_size]
            loss, g_w, g_b = _loss_and_grads(weights, biases, X[batch], y[batch], hyper.activation)
            if not math.isfinite(loss):
                raise DivergenceError(f"training loss became non-finite at epoch {epoch}")
            for i in range(len(weights)):
                weights[i] = weights[i] - hyper.learning_rate * g_w[i]
                biases[i] = biases[i] - hyper.learning_rate * g_b[i]

        train_rmse = rmse(_predict_normalized(weights, biases, X, hyper.activation), y)
        if val_n is not None:
            score = rmse(_predict_normalized(weights, biases, val_n.X, hyper.activation), val_n.y)
        else:
            score = train_rmse
        if not math.isfinite(score):
            raise DivergenceError(f"validation loss became non-finite at epoch {epoch}")
        log.append({"epoch": epoch, "train_rmse": train_rmse, "val_rmse": score})
        if score < best_score:
            best_score = score
            best_w = [w.copy() for w in weights]
            best_b = [b.copy() for b in biases]
            since_best = 0
        else:
            since_best += 1
            if since_best >= hyper.patience:
                break

    return MlpModel(
        layer_sizes=layer_sizes,
        weights=best_w,
        biases=best_b,
        activation=hyper.activation,
        norm_stats=stats,
        seed=seed,
        train_log=log,
    )


def predict_mlp(model: MlpModel, X) -> np.ndarray:
    """Predict production for raw feature rows, in tonnes, clamped at 0."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionMismatchError(f"X must be 2-D, got shape {X.shape}")
    if X.shape[1] != model.layer_sizes[0]:
        raise DimensionMismatchError(
            f"X has {X.shape[1]} features, model expects {model.layer_sizes[0]}"
        )
    stats = model.norm_stats
    Xn = (X - stats.feature_mean) / stats.feature_std
    y_norm = _predict_normalized(model.weights, model.biases, Xn, model.activation)
    return np.maximum(denormalize_targets(stats, y_norm), 0.0)


def rmse(pred, actual) -> float:
    pred = np.asarray(pred, dtype=np.float64).reshape(-1)
    actual = np.asarray(actual, dtype=np.float64).reshape(-1)
    if pred.shape[0] != actual.shape[0]:
        raise LengthMismatchError(f"{pred.shape[0]} predictions vs {actual.shape[0]} actuals")
    if pred.shape[0] == 0:
        raise EmptyInputError("rmse needs at least one pair")
    diff = pred - actual
    return float(np.sqrt(np.mean(diff * diff)))


def r_squared(pred, actual) -> float:
    """Coefficient of determination; actual must not be constant."""
    pred = np.asarray(pred, dtype=np.float64).reshape(-1)
    actual = np.asarray(actual, dtype=np.float64).reshape(-1)
    if pred.shape[0] != actual.shape[0]:
        raise LengthMismatchError(f"{pred.shape[0]} predictions vs {actual.shape[0]} actuals")
    if pred.shape[0] == 0:
        raise EmptyInputError("r_squared needs at least one pair")
    ss_tot = float(np.sum((actual - actual.mean()) ** 2))
    if ss_tot == 0.0:
        raise ValueError("r_squared undefined for constant actuals")
    ss_res = float(np.sum((actual - pred) ** 2))
    return 1.0 - ss_res / ss_tot


def save_mlp(model: MlpModel, path) -> None:
    stats = model.norm_stats
    doc = {
        "layer_sizes": list(model.layer_sizes),
        "activation": model.activation,
        "weights": [w.reshape(-1).tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
        "norm_stats": {
            "feature_names": list(stats.feature_names),
            "feature_mean": stats.feature_mean.tolist(),
            "feature_std": stats.feature_std.tolist(),
            "dropped": list(stats.dropped),
            "y_mean": stats.y_mean,
            "y_std": stats.y_std,
        },
        "seed": model.seed,
        "train_log": model.train_log,
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n", encoding="utf-8")


def load_mlp(path) -> MlpModel:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    sizes = tuple(int(s) for s in doc["layer_sizes"])
    weights = [
        np.asarray(flat, dtype=np.float64).reshape(sizes[i], sizes[i + 1])
        for i, flat in enumerate(doc["weights"])
    ]
    biases = [np.asarray(b, dtype=np.float64) for b in doc["biases"]]
    ns = doc["norm_stats"]
    stats = NormStats(
        feature_names=tuple(ns["feature_names"]),
        feature_mean=np.asarray(ns["feature_mean"], dtype=np.float64),
        feature_std=np.asarray(ns["feature_std"], dtype=np.float64),
        dropped=tuple(ns["dropped"]),
        y_mean=float(ns["y_mean"]),
        y_std=float(ns["y_std"]),
    )
    return MlpModel(
        layer_sizes=sizes,
        weights=weights,
        biases=biases,
        activation=doc["activation"],
        norm_stats=stats,
        seed=int(doc["seed"]),
        train_log=list(doc["train_log"]),
    )
