"""Reference softmax MLP trained with plain mini-batch gradient descent.

Class labels are 1..N everywhere in the public API. Inputs are standardized
with statistics of the fitting subset, and those statistics travel with the
model so prediction needs nothing else.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ._persist import read_container, write_container
from .errors import ConfigError, DimensionMismatch, FormatError, LabelOutOfRange, NonFinite
from .hsio import stratified_indices

DEFAULT_HIDDEN = (64, 32)


@dataclass(frozen=True)
class MlpConfig:
    layer_sizes: tuple
    activation: str = "relu"
    learning_rate: float = 0.01
    epochs: int = 90
    batch_size: int = 64
    seed: int = 0
    validation_fraction: float = 0.1

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 2 or min(sizes) < 1:
            raise ConfigError(f"layer_sizes needs at least input and output sizes >= 1, got {sizes}")
        if self.activation not in ("relu", "tanh"):
            raise ConfigError(f"activation must be relu or tanh, got {self.activation!r}")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if int(self.epochs) < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if int(self.batch_size) < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ConfigError("validation_fraction must be in [0, 1)")

    @classmethod
    def default(cls, n_features: int, n_classes: int, **overrides) -> "MlpConfig":
        return cls(layer_sizes=(n_features, *DEFAULT_HIDDEN, n_classes), **overrides)

    @property
    def n_features(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_classes(self) -> int:
        return self.layer_sizes[-1]


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: Optional[float]
    val_acc: Optional[float]


@dataclass(eq=False)
class TrainedModel:
    config: MlpConfig
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    feature_mean: np.ndarray
    feature_scale: np.ndarray
    history: List[EpochRecord] = field(default_factory=list)

    def params(self):
        return list(zip(self.weights, self.biases))


def _activate(z, activation):
    if activation == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _activation_grad(z, h, activation):
    if activation == "relu":
        return (z > 0.0).astype(z.dtype)
    return 1.0 - h * h


def _forward(params, x, activation):
    zs, hs = [], [x]
    h = x
    for i, (w, b) in enumerate(params):
        z = h @ w + b
        zs.append(z)
        if i < len(params) - 1:
            h = _activate(z, activation)
            hs.append(h)
        else:
            h = z
    return zs, hs, h


def _log_softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _check_labels(labels, n_classes):
    y = np.asarray(labels)
    if y.size and (y.min() < 1 or y.max() > n_classes):
        raise LabelOutOfRange(f"labels must lie in 1..{n_classes}, got range {y.min()}..{y.max()}")
    return y.astype(np.int64) - 1


def loss_and_gradient(params, features, labels, activation: str = "relu"):
    """Mean softmax cross-entropy of a batch and its gradient by backpropagation.

    Parameters
    ----------
    params : list of (W, b)
        ``W`` has shape (fan_in, fan_out).
    features : array of shape (B, fan_in of the first layer)
    labels : array of shape (B,), values in 1..N

    Returns
    -------
    loss : float
    grads : list of (dW, db) matching ``params``
    """
    x = np.asarray(features, dtype=np.float64)
    n_classes = params[-1][0].shape[1]
    y = _check_labels(labels, n_classes)
    zs, hs, logits = _forward(params, x, activation)
    logp = _log_softmax(logits)
    batch = x.shape[0]
    loss = float(-logp[np.arange(batch), y].mean())
    if not math.isfinite(loss):
        raise NonFinite("cross-entropy loss is not finite")

    delta = np.exp(logp)
    delta[np.arange(batch), y] -= 1.0
    delta /= batch
    grads = [None] * len(params)
    for i in range(len(params) - 1, -1, -1):
        w, _ = params[i]
        grads[i] = (hs[i].T @ delta, delta.sum(axis=0))
        if i > 0:
            delta = (delta @ w.T) * _activation_grad(zs[i - 1], hs[i], activation)
    return loss, grads


def _init_params(sizes, activation, rng):
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        gain = 2.0 if activation == "relu" else 1.0
        w = rng.standard_normal((fan_in, fan_out)) * math.sqrt(gain / fan_in)
        params.append((w, np.zeros(fan_out)))
    return params


def _evaluate(params, x, y0, activation):
    _, _, logits = _forward(params, x, activation)
    logp = _log_softmax(logits)
    loss = float(-logp[np.arange(x.shape[0]), y0].mean())
    acc = float(np.mean(np.argmax(logits, axis=1) == y0))
    return loss, acc


def train(features, labels, cfg: MlpConfig) -> TrainedModel:
    """Train the MLP; deterministic for a fixed ``cfg.seed``.

    A stratified ``cfg.validation_fraction`` of the rows is held out for the
    per-epoch validation curve and never used for updates.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != cfg.n_features:
        raise DimensionMismatch(f"expected (M, {cfg.n_features}) features, got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NonFinite("features contain NaN or Inf")
    y0 = _check_labels(labels, cfg.n_classes)
    if y0.shape != (x.shape[0],):
        raise DimensionMismatch(f"labels {y0.shape} do not match features {x.shape}")
    if x.shape[0] < cfg.batch_size:
        raise ValueError(f"need at least batch_size={cfg.batch_size} samples, got {x.shape[0]}")

    init_ss, shuffle_ss, val_ss = np.random.SeedSequence(cfg.seed).spawn(3)
    if cfg.validation_fraction > 0:
        val_idx, fit_idx = stratified_indices(y0, cfg.validation_fraction, np.random.default_rng(val_ss))
    else:
        val_idx, fit_idx = np.empty(0, dtype=np.intp), np.arange(x.shape[0])

    mean = x[fit_idx].mean(axis=0)
    scale = x[fit_idx].std(axis=0)
    scale[scale == 0] = 1.0
    xs = (x - mean) / scale
    x_fit, y_fit = xs[fit_idx], y0[fit_idx]
    x_val, y_val = xs[val_idx], y0[val_idx]

    params = _init_params(cfg.layer_sizes, cfg.activation, np.random.default_rng(init_ss))
    shuffle_rng = np.random.default_rng(shuffle_ss)
    lr = cfg.learning_rate
    history = []
    # overflow is reported below as NonFinite, not as numpy warnings
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(1, cfg.epochs + 1):
            order = shuffle_rng.permutation(x_fit.shape[0])
            for start in range(0, order.size, cfg.batch_size):
                batch = order[start:start + cfg.batch_size]
                try:
                    _, grads = loss_and_gradient(params, x_fit[batch], y_fit[batch] + 1, cfg.activation)
                except NonFinite as exc:
                    raise NonFinite(f"training diverged in epoch {epoch}") from exc
                params = [(w - lr * gw, b - lr * gb) for (w, b), (gw, gb) in zip(params, grads)]
            tr_loss, tr_acc = _evaluate(params, x_fit, y_fit, cfg.activation)
            if not math.isfinite(tr_loss):
                raise NonFinite(f"training loss became non-finite in epoch {epoch}")
            if y_val.size:
                va_loss, va_acc = _evaluate(params, x_val, y_val, cfg.activation)
            else:
                va_loss = va_acc = None
            history.append(EpochRecord(epoch, tr_loss, tr_acc, va_loss, va_acc))

    return TrainedModel(
        config=cfg,
        weights=[w for w, _ in params],
        biases=[b for _, b in params],
        feature_mean=mean,
        feature_scale=scale,
        history=history,
    )


def predict(model: TrainedModel, features):
    """Return (labels in 1..N, class probabilities of shape (M, N))."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.config.n_features:
        raise DimensionMismatch(f"expected (M, {model.config.n_features}) features, got {x.shape}")
    xs = (x - model.feature_mean) / model.feature_scale
    _, _, logits = _forward(model.params(), xs, model.config.activation)
    proba = np.exp(_log_softmax(logits))
    return np.argmax(proba, axis=1) + 1, proba


def save_model(model: TrainedModel, path) -> None:
    arrays = {"feature_mean": model.feature_mean, "feature_scale": model.feature_scale}
    for i, (w, b) in enumerate(model.params()):
        arrays[f"W{i}"] = w
        arrays[f"b{i}"] = b
    header = {
        "kind": "mlp",
        "config": asdict(model.config),
        "history": [asdict(r) for r in model.history],
    }
    write_container(path, "HSDM", header, arrays)


def load_model(path) -> TrainedModel:
    doc, arrays = read_container(path, "HSDM")
    try:
        cfg_doc = dict(doc["config"])
        cfg_doc["layer_sizes"] = tuple(cfg_doc["layer_sizes"])
        cfg = MlpConfig(**cfg_doc)
        n_layers = len(cfg.layer_sizes) - 1
        return TrainedModel(
            config=cfg,
            weights=[arrays[f"W{i}"] for i in range(n_layers)],
            biases=[arrays[f"b{i}"] for i in range(n_layers)],
            feature_mean=arrays["feature_mean"],
            feature_scale=arrays["feature_scale"],
            history=[EpochRecord(**r) for r in doc["history"]],
        )
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{path}: incomplete model file ({exc})") from exc


def write_history_csv(model: TrainedModel, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "train_loss", "train_acc", "val_loss", "val_acc"])
        for r in model.history:
            writer.writerow([
                r.epoch, repr(r.train_loss), repr(r.train_acc),
                "" if r.val_loss is None else repr(r.val_loss),
                "" if r.val_acc is None else repr(r.val_acc),
            ])


class SoftmaxMLP(ClassifierMixin, BaseEstimator):
    """Estimator wrapper around :func:`train` / :func:`predict` for arbitrary class labels."""

    def __init__(self, hidden_layer_sizes=DEFAULT_HIDDEN, activation="relu", learning_rate=0.01,
                 epochs=90, batch_size=64, random_state=0, validation_fraction=0.1):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.activation = activation
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.random_state = random_state
        self.validation_fraction = validation_fraction

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        self.classes_, encoded = np.unique(y, return_inverse=True)
        cfg = MlpConfig(
            layer_sizes=(X.shape[1], *self.hidden_layer_sizes, len(self.classes_)),
            activation=self.activation,
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            batch_size=min(self.batch_size, X.shape[0]),
            seed=self.random_state,
            validation_fraction=self.validation_fraction,
        )
        self.model_ = train(X, encoded + 1, cfg)
        self.n_features_in_ = X.shape[1]
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        return predict(self.model_, check_array(X, dtype=np.float64))[1]

    def predict(self, X):
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]
