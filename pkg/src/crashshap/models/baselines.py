"""Logistic regression and Gaussian naive Bayes baselines."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import ConfigError, TrainingError
from .gbdt import sigmoid


def _xy(train):
    x = np.asarray(train.x if hasattr(train, "x") else train[0], dtype=np.float64)
    y = np.asarray(train.y if hasattr(train, "y") else train[1], dtype=np.float64)
    if x.shape[0] == 0 or y.min() == y.max():
        raise TrainingError("training needs both classes present")
    return x, y


def _as_2d(X, p):
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.shape[1] != p:
        raise ValueError(f"expected {p} features, got {X.shape[1]}")
    return X, single


class _Classifier:
    def predict_proba(self, X):
        m = self.predict_margin(X)
        return float(sigmoid(m)) if np.ndim(m) == 0 else sigmoid(m)


@dataclass(frozen=True)
class LogisticConfig:
    l2: float = 1e-3
    epochs: int = 2000
    step: float = 1.0
    tol: float = 1e-9

    kind = "logistic"

    def __post_init__(self):
        if self.l2 < 0 or self.epochs < 1 or self.step <= 0:
            raise ConfigError("logistic config needs l2 >= 0, epochs >= 1, step > 0")

    def to_dict(self):
        return {"kind": self.kind, **asdict(self)}


@dataclass
class LogisticModel(_Classifier):
    weights: np.ndarray
    bias: float
    l2: float
    loss_history: list = field(default_factory=list, compare=False, repr=False)

    kind = "logistic"

    def predict_margin(self, X):
        X, single = _as_2d(X, len(self.weights))
        m = X @ self.weights + self.bias
        return float(m[0]) if single else m

    def to_dict(self):
        return {"format": "crashshap.model", "kind": self.kind, "weights": self.weights.tolist(),
                "bias": self.bias, "l2": self.l2}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["weights"], dtype=np.float64), float(d["bias"]), float(d["l2"]))


def logistic_objective(w, b, x, y, l2):
    """Mean log-loss plus ``l2/2 * |w|^2`` and its gradient ``(dw, db)``."""
    z = x @ w + b
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * (w @ w))
    r = sigmoid(z) - y
    return loss, x.T @ r / len(y) + l2 * w, float(np.mean(r))


def fit_logistic(train, l2: float = 1e-3, epochs: int = 2000, step: float = 1.0, tol: float = 1e-9) -> LogisticModel:
    """Full-batch gradient descent; a step that raises the loss is halved and retried."""
    x, y = _xy(train)
    w = np.zeros(x.shape[1])
    pbar = y.mean()
    b = math.log(pbar / (1 - pbar))
    loss, gw, gb = logistic_objective(w, b, x, y, l2)
    history = [loss]
    for _ in range(epochs):
        if math.sqrt(gw @ gw + gb * gb) <= tol:
            break
        while True:
            w_new, b_new = w - step * gw, b - step * gb
            new_loss, ngw, ngb = logistic_objective(w_new, b_new, x, y, l2)
            if new_loss <= loss:
                break
            step *= 0.5
            if step < 1e-16:
                return LogisticModel(w, b, l2, history)
        w, b, loss, gw, gb = w_new, b_new, new_loss, ngw, ngb
        history.append(loss)
        step *= 1.05
    return LogisticModel(w, float(b), l2, history)


@dataclass(frozen=True)
class GnbConfig:
    var_floor: float = 1e-9

    kind = "gnb"

    def __post_init__(self):
        if self.var_floor <= 0:
            raise ConfigError("var_floor must be positive")

    def to_dict(self):
        return {"kind": self.kind, **asdict(self)}


@dataclass
class GaussianNbModel(_Classifier):
    priors: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    var_floor: float = 1e-9

    kind = "gnb"

    def _log_joint(self, X):
        ll = -0.5 * (np.log(2 * np.pi * self.variances)[None, :, :]
                     + (X[:, None, :] - self.means[None, :, :]) ** 2 / self.variances[None, :, :])
        return ll.sum(axis=2) + np.log(self.priors)[None, :]

    def predict_margin(self, X):
        X, single = _as_2d(X, self.means.shape[1])
        lj = self._log_joint(X)
        m = lj[:, 1] - lj[:, 0]
        return float(m[0]) if single else m

    def posterior(self, X):
        X, _ = _as_2d(X, self.means.shape[1])
        lj = self._log_joint(X)
        lj -= lj.max(axis=1, keepdims=True)
        e = np.exp(lj)
        return e / e.sum(axis=1, keepdims=True)

    def to_dict(self):
        return {"format": "crashshap.model", "kind": self.kind, "priors": self.priors.tolist(),
                "means": self.means.tolist(), "variances": self.variances.tolist(), "var_floor": self.var_floor}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["priors"]), np.array(d["means"]), np.array(d["variances"]), float(d["var_floor"]))


def fit_gnb(train, var_floor: float = 1e-9) -> GaussianNbModel:
    x, y = _xy(train)
    priors, means, variances = [], [], []
    for cls in (0, 1):
        xc = x[y == cls]
        priors.append(len(xc) / len(x))
        means.append(xc.mean(axis=0))
        variances.append(np.maximum(xc.var(axis=0), var_floor))
    return GaussianNbModel(np.array(priors), np.array(means), np.array(variances), var_floor)
