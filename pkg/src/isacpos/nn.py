"""Minimal feed-forward network stack: dense layers, ReLU, MSE loss,
Adam, and mini-batch training with an 80/20 validation split.

The math lives in plain functions over :class:`Mlp` parameter structs so
gradients and optimizer steps are directly testable; :class:`MlpRegressor`
wraps them in a scikit-learn-style estimator that owns input/output
standardization (fitted on the training split only).

Loss is the mean over the batch of the squared Euclidean error per sample.
The ReLU subgradient at exactly 0 is defined as 0. All parameters are
double precision.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array

from .io import atomic_write


@dataclass
class Mlp:
    """Dense network parameters: one weight matrix and bias vector per layer."""

    layer_sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]


def init_mlp(layer_sizes: list[int], rng: np.random.Generator) -> Mlp:
    """Glorot-uniform weights, zero biases."""
    if len(layer_sizes) < 2 or any(s < 1 for s in layer_sizes):
        raise ValueError(f"invalid layer sizes {layer_sizes}")
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes, layer_sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, (fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Mlp(list(layer_sizes), weights, biases)


def _as_batch(x: np.ndarray, expected_dim: int, name: str) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != expected_dim:
        raise ValueError(f"{name} must have {expected_dim} features, got shape {x.shape}")
    return x, single


def forward(net: Mlp, x: np.ndarray) -> np.ndarray:
    """Affine + ReLU through the hidden layers, affine at the output."""
    batch, single = _as_batch(x, net.layer_sizes[0], "input")
    a = batch
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        a = a @ w + b
        if i < last:
            a = np.maximum(a, 0.0)
    return a[0] if single else a


def mse_loss(pred: np.ndarray, truth: np.ndarray) -> float:
    """Mean over the batch of the squared Euclidean error per sample."""
    pred, truth = np.asarray(pred, dtype=float), np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {truth.shape}")
    if pred.ndim == 1:
        pred, truth = pred[None, :], truth[None, :]
    if pred.size == 0:
        raise ValueError("empty batch")
    return float(np.mean(np.sum((pred - truth) ** 2, axis=1)))


def backward(net: Mlp, x: np.ndarray, target: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Exact reverse-mode gradients of :func:`mse_loss` w.r.t. all parameters."""
    batch, _ = _as_batch(x, net.layer_sizes[0], "input")
    targets, _ = _as_batch(target, net.layer_sizes[-1], "target")
    if batch.shape[0] != targets.shape[0]:
        raise ValueError("input and target batch sizes differ")
    n = batch.shape[0]
    last = len(net.weights) - 1

    activations = [batch]
    pre_acts = []
    a = batch
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w + b
        pre_acts.append(z)
        a = np.maximum(z, 0.0) if i < last else z
        activations.append(a)

    grad_w = [np.empty_like(w) for w in net.weights]
    grad_b = [np.empty_like(b) for b in net.biases]
    delta = 2.0 * (activations[-1] - targets) / n
    for i in range(last, -1, -1):
        grad_w[i] = activations[i].T @ delta
        grad_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ net.weights[i].T) * (pre_acts[i - 1] > 0.0)
    return grad_w, grad_b


@dataclass
class AdamState:
    """First/second moment accumulators mirroring the parameter shapes."""

    first_moment: list[np.ndarray]
    second_moment: list[np.ndarray]
    step_count: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_params(cls, params: list[np.ndarray], learning_rate: float = 1e-3) -> "AdamState":
        return cls(
            first_moment=[np.zeros_like(p) for p in params],
            second_moment=[np.zeros_like(p) for p in params],
            learning_rate=learning_rate,
        )


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState) -> None:
    """One bias-corrected Adam update, applied to ``params`` in place."""
    if len(params) != len(grads) or len(params) != len(state.first_moment):
        raise ValueError("parameter, gradient, and moment counts differ")
    state.step_count += 1
    t = state.step_count
    correction1 = 1.0 - state.beta1**t
    correction2 = 1.0 - state.beta2**t
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        p -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)


@dataclass
class TrainConfig:
    """Mini-batch training hyperparameters."""

    batch_size: int = 32
    max_epochs: int = 500
    patience: int = 20
    validation_fraction: float = 0.2
    learning_rate: float = 1e-3
    rng_seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must be in (0, 1)")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be at least 1")
        if self.patience < 0:
            raise ValueError("patience must be non-negative")


def split_indices(
    n: int, validation_fraction: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic shuffled train/validation split."""
    perm = rng.permutation(n)
    n_val = max(1, int(round(validation_fraction * n)))
    return perm[n_val:], perm[:n_val]


@dataclass
class TrainResult:
    net: Mlp
    history: list[tuple[float, float]]  # (train_loss, val_loss) per epoch
    best_epoch: int
    best_val_loss: float


def train(
    net: Mlp,
    x: np.ndarray,
    y: np.ndarray,
    cfg: TrainConfig,
    split: tuple[np.ndarray, np.ndarray] | None = None,
) -> TrainResult:
    """Mini-batch Adam training with early stopping on validation loss.

    Returns the parameters from the best validation epoch; the initial
    parameters count as epoch 0, so the result is never worse than the
    starting point on the validation split.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.shape[0]
    min_size = int(np.ceil(2.0 / cfg.validation_fraction))
    if n < min_size:
        raise ValueError(f"dataset of {n} samples is too small; need at least {min_size}")

    rng = np.random.default_rng(cfg.rng_seed)
    if split is None:
        train_idx, val_idx = split_indices(n, cfg.validation_fraction, rng)
    else:
        train_idx, val_idx = split
    x_train, y_train = x[train_idx], y[train_idx]
    x_val, y_val = x[val_idx], y[val_idx]

    net = Mlp(list(net.layer_sizes), [w.copy() for w in net.weights], [b.copy() for b in net.biases])
    params = net.weights + net.biases
    state = AdamState.for_params(params, learning_rate=cfg.learning_rate)

    best_val = mse_loss(forward(net, x_val), y_val)
    best_snapshot = ([w.copy() for w in net.weights], [b.copy() for b in net.biases])
    best_epoch = 0
    history: list[tuple[float, float]] = []
    epochs_since_best = 0

    n_train = len(train_idx)
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(n_train)
        batch_losses = []
        for start in range(0, n_train, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            xb, yb = x_train[batch], y_train[batch]
            loss = mse_loss(forward(net, xb), yb)
            if not np.isfinite(loss):
                raise RuntimeError(
                    f"non-finite loss {loss} at epoch {epoch}, batch {start // cfg.batch_size}"
                )
            grad_w, grad_b = backward(net, xb, yb)
            adam_step(params, grad_w + grad_b, state)
            batch_losses.append(loss)
        train_loss = float(np.mean(batch_losses))
        val_loss = mse_loss(forward(net, x_val), y_val)
        history.append((train_loss, val_loss))
        if val_loss < best_val:
            best_val = val_loss
            best_snapshot = ([w.copy() for w in net.weights], [b.copy() for b in net.biases])
            best_epoch = epoch
            epochs_since_best = 0
        else:
            epochs_since_best += 1
            if epochs_since_best > cfg.patience:
                break

    net.weights, net.biases = best_snapshot
    return TrainResult(net=net, history=history, best_epoch=best_epoch, best_val_loss=best_val)


class Standardizer:
    """Per-feature affine standardization (zero-variance features pass through)."""

    def __init__(self):
        self.mean_: np.ndarray | None = None
        self.scale_: np.ndarray | None = None

    def fit(self, x: np.ndarray) -> "Standardizer":
        x = np.asarray(x, dtype=float)
        self.mean_ = x.mean(axis=0)
        scale = x.std(axis=0)
        scale[scale == 0.0] = 1.0
        self.scale_ = scale
        return self

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.mean_) / self.scale_

    def inverse_transform(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float) * self.scale_ + self.mean_


class MlpRegressor(BaseEstimator, RegressorMixin):
    """Scikit-learn-style front end for the from-scratch MLP.

    ``fit`` standardizes inputs and targets with statistics of the training
    split only, trains with mini-batch Adam, and keeps the best-validation
    parameters; ``predict`` de-standardizes so the API speaks meters.
    """

    def __init__(
        self,
        hidden_layer_sizes: tuple[int, ...] = (32, 16),
        learning_rate: float = 1e-3,
        batch_size: int = 32,
        max_epochs: int = 500,
        patience: int = 20,
        validation_fraction: float = 0.2,
        random_state: int = 0,
        clip_sigma: float = 4.0,
    ):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.validation_fraction = validation_fraction
        self.random_state = random_state
        self.clip_sigma = clip_sigma

    def fit(self, X, y) -> "MlpRegressor":
        X = check_array(X, dtype=float)
        y = check_array(y, dtype=float, ensure_2d=False)
        if y.ndim == 1:
            y = y[:, None]
        if X.shape[0] != y.shape[0]:
            raise ValueError("X and y have different sample counts")

        cfg = TrainConfig(
            batch_size=self.batch_size,
            max_epochs=self.max_epochs,
            patience=self.patience,
            validation_fraction=self.validation_fraction,
            learning_rate=self.learning_rate,
            rng_seed=self.random_state,
        )
        rng = np.random.default_rng(self.random_state)
        train_idx, val_idx = split_indices(X.shape[0], cfg.validation_fraction, rng)

        self.input_scaler_ = Standardizer().fit(X[train_idx])
        self.output_scaler_ = Standardizer().fit(y[train_idx])
        xs = self.input_scaler_.transform(X)
        ys = self.output_scaler_.transform(y)

        layer_sizes = [X.shape[1], *self.hidden_layer_sizes, y.shape[1]]
        net = init_mlp(layer_sizes, rng)
        result = train(net, xs, ys, cfg, split=(train_idx, val_idx))
        self.net_ = result.net
        self.history_ = result.history
        self.best_epoch_ = result.best_epoch
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = check_array(X if not single else X[None, :], dtype=float)
        # clip to the training envelope: ReLU nets extrapolate linearly and
        # unboundedly, which destabilizes recurrent use of the estimator
        xs = np.clip(self.input_scaler_.transform(X), -self.clip_sigma, self.clip_sigma)
        out = self.output_scaler_.inverse_transform(forward(self.net_, xs))
        return out[0] if single else out


MODEL_SCHEMA = "isacpos-mlp/1"


def mlp_to_dict(model: MlpRegressor) -> dict:
    """Serializable document for a fitted regressor (floats via repr,
    round-trips bit-exactly)."""
    return {
        "schema": MODEL_SCHEMA,
        "layer_sizes": list(model.net_.layer_sizes),
        "hyperparameters": model.get_params(),
        "input_mean": model.input_scaler_.mean_.tolist(),
        "input_scale": model.input_scaler_.scale_.tolist(),
        "output_mean": model.output_scaler_.mean_.tolist(),
        "output_scale": model.output_scaler_.scale_.tolist(),
        "weights": [w.tolist() for w in model.net_.weights],
        "biases": [b.tolist() for b in model.net_.biases],
    }


def mlp_from_dict(doc: dict) -> MlpRegressor:
    if doc.get("schema") != MODEL_SCHEMA:
        raise ValueError(f"unsupported model schema {doc.get('schema')!r}")
    params = doc["hyperparameters"]
    params["hidden_layer_sizes"] = tuple(params["hidden_layer_sizes"])
    model = MlpRegressor(**params)
    layer_sizes = list(doc["layer_sizes"])
    model.net_ = Mlp(
        layer_sizes,
        [np.array(w, dtype=float) for w in doc["weights"]],
        [np.array(b, dtype=float) for b in doc["biases"]],
    )
    model.input_scaler_ = Standardizer()
    model.input_scaler_.mean_ = np.array(doc["input_mean"], dtype=float)
    model.input_scaler_.scale_ = np.array(doc["input_scale"], dtype=float)
    model.output_scaler_ = Standardizer()
    model.output_scaler_.mean_ = np.array(doc["output_mean"], dtype=float)
    model.output_scaler_.scale_ = np.array(doc["output_scale"], dtype=float)
    model.n_features_in_ = layer_sizes[0]
    return model


def save_mlp(path, model: MlpRegressor) -> None:
    with atomic_write(path) as handle:
        json.dump(mlp_to_dict(model), handle, indent=1)
        handle.write("\n")


def load_mlp(path) -> MlpRegressor:
    with open(path, encoding="utf-8") as handle:
        return mlp_from_dict(json.load(handle))
