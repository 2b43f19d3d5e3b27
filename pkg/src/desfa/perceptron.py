"""One-vs-rest online perceptron, the weak base learner of the pool."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit

from . import constants as K
from .errors import ValidationError


@dataclass(frozen=True, eq=False)
class Perceptron:
    weights: np.ndarray   # (C, D)
    bias: np.ndarray      # (C,)
    scale_min: np.ndarray  # (D,)
    scale_max: np.ndarray  # (D,)
    train_seed: int = 0

    @property
    def n_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def n_features(self) -> int:
        return self.weights.shape[1]

    def scale(self, X):
        span = self.scale_max - self.scale_min
        span = np.where(span > 0, span, 1.0)
        return (X - self.scale_min) / span

    def decision_function(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValidationError(f"expected patterns of length {self.n_features}, got shape {X.shape}")
        return self.scale(X) @ self.weights.T + self.bias

    def predict_batch(self, X) -> np.ndarray:
        # argmax returns the first maximum: ties go to the smaller class index
        return np.argmax(self.decision_function(X), axis=1)

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "bias": self.bias.tolist(),
            "scale_min": self.scale_min.tolist(),
            "scale_max": self.scale_max.tolist(),
            "train_seed": int(self.train_seed),
        }

    @classmethod
    def from_dict(cls, d) -> Perceptron:
        return cls(np.array(d["weights"], dtype=np.float64), np.array(d["bias"], dtype=np.float64),
                   np.array(d["scale_min"], dtype=np.float64), np.array(d["scale_max"], dtype=np.float64),
                   int(d["train_seed"]))


def predict(model: Perceptron, pattern) -> int:
    x = np.asarray(pattern, dtype=np.float64)
    if x.ndim != 1:
        raise ValidationError("predict takes a single pattern; use predict_batch for matrices")
    return int(model.predict_batch(x[None, :])[0])


@njit(cache=True)
def _epoch(X, y, W, b, order, lr):
    n_classes, n_features = W.shape
    updated = 0
    for i in order:
        hit = False
        for c in range(n_classes):
            s = b[c]
            for j in range(n_features):
                s += W[c, j] * X[i, j]
            t = 1.0 if y[i] == c else -1.0
            if t * s <= 0.0:
                for j in range(n_features):
                    W[c, j] += lr * t * X[i, j]
                b[c] += lr * t
                hit = True
        if hit:
            updated += 1
    return updated


def train_perceptron(train, epochs=K.PERCEPTRON_EPOCHS, learning_rate=K.PERCEPTRON_LEARNING_RATE,
                     seed=0) -> Perceptron:
    """Classic per-class perceptron updates from zero weights.

    Features are min-max scaled with ranges taken from ``train``. Each epoch
    visits samples in a fresh seeded order; training stops after the first
    epoch without a mistake.
    """
    if train.n_samples < 1:
        raise ValidationError("cannot train on an empty dataset")
    if epochs < 1:
        raise ValidationError(f"epochs must be >= 1, got {epochs}")
    if not learning_rate > 0:
        raise ValidationError(f"learning_rate must be positive, got {learning_rate}")
    lo = train.features.min(axis=0)
    hi = train.features.max(axis=0)
    model = Perceptron(np.zeros((train.n_classes, train.n_features)), np.zeros(train.n_classes),
                       lo, hi, int(seed))
    X = np.ascontiguousarray(model.scale(train.features))
    y = np.ascontiguousarray(train.labels)
    rng = np.random.default_rng(seed)
    for _ in range(epochs):
        order = rng.permutation(train.n_samples)
        if _epoch(X, y, model.weights, model.bias, order, float(learning_rate)) == 0:
            break
    return model


def save_perceptron(model: Perceptron, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(model.to_dict()))
    return path


def load_perceptron(path) -> Perceptron:
    return Perceptron.from_dict(json.loads(Path(path).read_text()))
