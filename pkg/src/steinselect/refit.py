"""Two-step refit: a small dense ReLU regressor on the selected features.

The network is hand-rolled (forward pass, explicit backprop, seeded Glorot
init) so training is deterministic and the analytic gradients can be checked
against finite differences. Inputs are standardized per feature by default;
there is no early stopping because BIC comparisons across sparsity levels
need a fixed training budget.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import Dataset
from .errors import ConfigError, TrainingDivergenceError, ValidationError

_OPTIMIZERS = ("sgd_momentum", "adaptive_moment")


@dataclass(frozen=True)
class RefitConfig:
    hidden: tuple[int, ...] = (64, 32)
    activation: str = "relu"
    epochs: int = 300
    batch_size: int = 64
    learning_rate: float = 1e-3
    optimizer: str = "sgd_momentum"
    momentum: float = 0.9
    seed: int = 0
    standardize_inputs: bool = True

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(w) for w in self.hidden))
        if len(self.hidden) == 0:
            raise ConfigError("at least one hidden layer is required")
        if any(w < 1 for w in self.hidden):
            raise ConfigError(f"hidden widths must be >= 1, got {self.hidden}")
        if self.activation != "relu":
            raise ConfigError("only relu activation is supported")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.optimizer not in _OPTIMIZERS:
            raise ConfigError(f"optimizer must be one of {_OPTIMIZERS}")

    def to_json(self) -> dict:
        return {
            "hidden": list(self.hidden),
            "activation": self.activation,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "optimizer": self.optimizer,
            "momentum": self.momentum,
            "seed": int(self.seed),
            "standardize_inputs": self.standardize_inputs,
        }


def init_params(
    n_inputs: int, hidden: Sequence[int], rng: np.random.Generator
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Glorot-uniform weights, zero biases, scalar linear output."""
    sizes = [n_inputs, *hidden, 1]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        a = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-a, a, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def _forward(weights, biases, X) -> tuple[np.ndarray, list[np.ndarray]]:
    acts = [X]
    h = X
    for W, b in zip(weights[:-1], biases[:-1]):
        h = np.maximum(h @ W + b, 0.0)
        acts.append(h)
    out = h @ weights[-1] + biases[-1]
    return out[:, 0], acts


def mse_loss_and_grads(weights, biases, X, y):
    """Mean-squared-error loss with analytic gradients for every parameter."""
    preds, acts = _forward(weights, biases, X)
    resid = preds - y
    loss = float(np.mean(resid**2))
    delta = (2.0 / len(y)) * resid[:, None]
    grad_w = [None] * len(weights)
    grad_b = [None] * len(biases)
    for layer in range(len(weights) - 1, -1, -1):
        grad_w[layer] = acts[layer].T @ delta
        grad_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ weights[layer].T) * (acts[layer] > 0)
    return loss, grad_w, grad_b


@dataclass
class RefitModel:
    """Trained regressor plus everything needed to replay its predictions."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    input_mean: np.ndarray
    input_sd: np.ndarray
    selected: tuple[int, ...]
    feature_ids: tuple[str, ...]
    n_features_full: int
    loss_curve: np.ndarray
    config: RefitConfig


class _SgdMomentum:
    def __init__(self, params, lr, momentum):
        self.lr = lr
        self.momentum = momentum
        self.velocity = [np.zeros_like(p) for p in params]

    def step(self, params, grads):
        for p, g, v in zip(params, grads, self.velocity):
            v *= self.momentum
            v -= self.lr * g
            p += v


class _Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params, grads):
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g**2
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def train(d: Dataset, selected: Sequence[int], cfg: RefitConfig) -> RefitModel:
    """Minimize training MSE over the selected columns by seeded mini-batch
    gradient descent. Raises on non-finite loss or when the final epoch's
    training MSE exceeds the first epoch's."""
    selected = tuple(int(j) for j in selected)
    if len(selected) == 0:
        raise ValidationError("selected feature set is empty")
    if any(not 0 <= j < d.p for j in selected):
        raise ValidationError(f"selected indices out of range for p={d.p}")
    X_raw = d.X[:, list(selected)]
    if cfg.standardize_inputs:
        mean = X_raw.mean(axis=0)
        sd = X_raw.std(axis=0)
        sd = np.where(sd > 0, sd, 1.0)  # constant columns pass through
    else:
        mean = np.zeros(X_raw.shape[1])
        sd = np.ones(X_raw.shape[1])
    X = (X_raw - mean) / sd
    y = d.y

    init_rng, shuffle_rng = (
        np.random.default_rng(ss) for ss in np.random.SeedSequence(int(cfg.seed)).spawn(2)
    )
    weights, biases = init_params(X.shape[1], cfg.hidden, init_rng)
    params = weights + biases
    if cfg.optimizer == "sgd_momentum":
        opt = _SgdMomentum(params, cfg.learning_rate, cfg.momentum)
    else:
        opt = _Adam(params, cfg.learning_rate)

    n = d.n
    batch = min(cfg.batch_size, n)
    curve = np.empty(cfg.epochs)
    step = 0
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        for start in range(0, n, batch):
            rows = order[start : start + batch]
            loss, grad_w, grad_b = mse_loss_and_grads(weights, biases, X[rows], y[rows])
            if not np.isfinite(loss):
                raise TrainingDivergenceError(
                    f"non-finite training loss at step {step}", step=step
                )
            opt.step(params, grad_w + grad_b)
            step += 1
        preds, _ = _forward(weights, biases, X)
        curve[epoch] = np.mean((preds - y) ** 2)
        if not np.isfinite(curve[epoch]):
            raise TrainingDivergenceError(
                f"non-finite epoch loss at step {step}", step=step
            )
    if curve[-1] > curve[0]:
        raise TrainingDivergenceError(
            f"training diverged: final MSE {curve[-1]:.6g} > initial {curve[0]:.6g}",
            step=step,
        )
    return RefitModel(
        weights=weights,
        biases=biases,
        input_mean=mean,
        input_sd=sd,
        selected=selected,
        feature_ids=tuple(d.feature_ids[j] for j in selected),
        n_features_full=d.p,
        loss_curve=curve,
        config=cfg,
    )


def _subset_for(model: RefitModel, X_new: np.ndarray) -> np.ndarray:
    X_new = np.asarray(X_new, dtype=float)
    if X_new.ndim == 1:
        X_new = X_new[None, :]
    k = len(model.selected)
    if X_new.shape[1] == k:
        return X_new
    if X_new.shape[1] == model.n_features_full:
        return X_new[:, list(model.selected)]
    raise ValidationError(
        f"expected {k} or {model.n_features_full} columns, got {X_new.shape[1]}"
    )


def predict(model: RefitModel, X_new) -> np.ndarray:
    """Forward pass on standardized inputs; accepts either the selected
    columns or the full original column set."""
    X = _subset_for(model, X_new)
    X = (X - model.input_mean) / model.input_sd
    preds, _ = _forward(model.weights, model.biases, X)
    return preds


def evaluate_mse(model: RefitModel, d_test: Dataset) -> float:
    """Mean squared prediction error on a held-out dataset; columns are
    matched by feature id when the test set has its own ids."""
    ids = {fid: j for j, fid in enumerate(d_test.feature_ids)}
    if all(fid in ids for fid in model.feature_ids):
        X = d_test.X[:, [ids[fid] for fid in model.feature_ids]]
    elif d_test.p in (len(model.selected), model.n_features_full):
        X = d_test.X
    else:
        missing = [fid for fid in model.feature_ids if fid not in ids]
        raise ValidationError(f"test set lacks model features: {', '.join(missing)}")
    preds = predict(model, X)
    return float(np.mean((preds - d_test.y) ** 2))


def model_to_json(model: RefitModel) -> dict:
    return {
        "architecture": {
            "hidden": list(model.config.hidden),
            "activation": "relu",
            "n_inputs": len(model.selected),
            "n_features_full": int(model.n_features_full),
        },
        "weights": [[list(map(float, row)) for row in W] for W in model.weights],
        "biases": [list(map(float, b)) for b in model.biases],
        "standardization": {
            "mean": [float(v) for v in model.input_mean],
            "sd": [float(v) for v in model.input_sd],
        },
        "selected_indices": [int(j) for j in model.selected],
        "selected_ids": [str(s) for s in model.feature_ids],
        "config": model.config.to_json(),
    }


def model_from_json(doc: dict) -> RefitModel:
    try:
        cfg = RefitConfig(
            hidden=tuple(doc["config"]["hidden"]),
            activation=doc["config"]["activation"],
            epochs=doc["config"]["epochs"],
            batch_size=doc["config"]["batch_size"],
            learning_rate=doc["config"]["learning_rate"],
            optimizer=doc["config"]["optimizer"],
            momentum=doc["config"]["momentum"],
            seed=doc["config"]["seed"],
            standardize_inputs=doc["config"]["standardize_inputs"],
        )
        weights = [np.array(W, dtype=float) for W in doc["weights"]]
        biases = [np.array(b, dtype=float) for b in doc["biases"]]
        model = RefitModel(
            weights=weights,
            biases=biases,
            input_mean=np.array(doc["standardization"]["mean"], dtype=float),
            input_sd=np.array(doc["standardization"]["sd"], dtype=float),
            selected=tuple(int(j) for j in doc["selected_indices"]),
            feature_ids=tuple(str(s) for s in doc["selected_ids"]),
            n_features_full=int(doc["architecture"]["n_features_full"]),
            loss_curve=np.array([]),
            config=cfg,
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed model document: {exc}") from None
    return model
