"""Bagged perceptron pool, majority-vote fusion and the static baselines."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import constants as K
from .datasets import Dataset
from .errors import ValidationError
from .perceptron import Perceptron, train_perceptron


@dataclass(frozen=True)
class PerceptronParams:
    epochs: int = K.PERCEPTRON_EPOCHS
    learning_rate: float = K.PERCEPTRON_LEARNING_RATE


@dataclass(frozen=True, eq=False)
class Ensemble:
    members: tuple
    bootstrap_seeds: tuple

    def __post_init__(self):
        if len(self.members) < 1:
            raise ValidationError("an ensemble needs at least one member")
        if len(self.members) != len(self.bootstrap_seeds):
            raise ValidationError("one bootstrap seed per member")
        if len({m.n_features for m in self.members}) != 1:
            raise ValidationError("members disagree on dimensionality")

    def __len__(self):
        return len(self.members)

    def predictions(self, X) -> np.ndarray:
        """(Q, L) matrix of member labels."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return np.column_stack([m.predict_batch(X) for m in self.members])

    def to_dict(self) -> dict:
        return {"bootstrap_seeds": [int(s) for s in self.bootstrap_seeds],
                "members": [m.to_dict() for m in self.members]}

    @classmethod
    def from_dict(cls, d) -> Ensemble:
        return cls(tuple(Perceptron.from_dict(m) for m in d["members"]), tuple(d["bootstrap_seeds"]))

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict()))
        return path

    @classmethod
    def load(cls, path) -> Ensemble:
        return cls.from_dict(json.loads(Path(path).read_text()))


def bootstrap_indices(n, seed) -> np.ndarray:
    return np.random.default_rng(seed).integers(0, n, size=n)


def bagging(train: Dataset, n_members=K.ENSEMBLE_SIZE, params=PerceptronParams(), seed=0) -> Ensemble:
    """Train ``n_members`` perceptrons, each on a bootstrap of ``train``.

    A bootstrap holding a single class is redrawn, at most
    ``BOOTSTRAP_RETRIES`` times.
    """
    if train.n_samples < 1:
        raise ValidationError("cannot bag an empty training set")
    if n_members < 1:
        raise ValidationError(f"ensemble size must be >= 1, got {n_members}")
    rng = np.random.default_rng(seed)
    members, seeds = [], []
    for i in range(n_members):
        for _ in range(K.BOOTSTRAP_RETRIES + 1):
            s = int(rng.integers(0, 2 ** 63 - 1))
            idx = bootstrap_indices(train.n_samples, s)
            if np.unique(train.labels[idx]).size >= 2:
                break
        else:
            raise ValidationError(
                f"member {i}: every bootstrap drawn contained a single class")
        members.append(train_perceptron(train.subset(idx), params.epochs, params.learning_rate, seed=s))
        seeds.append(s)
    return Ensemble(tuple(members), tuple(seeds))


# ------------------------------------------------------------------ fusion

def vote_labels(votes, mask=None, n_classes=None) -> np.ndarray:
    """Majority vote per row of a (Q, L) label matrix.

    ``mask`` restricts each row to a subset of classifiers. Ties go to the
    class voted by the lowest-index classifier among the tied classes.
    Rows with an empty mask are invalid.
    """
    votes = np.atleast_2d(np.asarray(votes, dtype=np.int64))
    if mask is None:
        mask = np.ones(votes.shape, dtype=bool)
    mask = np.atleast_2d(np.asarray(mask, dtype=bool))
    if votes.shape[1] == 0 or not mask.any(axis=1).all():
        raise ValidationError("majority vote over an empty classifier subset")
    if n_classes is None:
        n_classes = int(votes.max()) + 1
    q = votes.shape[0]
    counts = np.zeros((q, n_classes), dtype=np.int64)
    rows = np.broadcast_to(np.arange(q)[:, None], votes.shape)
    np.add.at(counts, (rows[mask], votes[mask]), 1)
    tied = counts == counts.max(axis=1, keepdims=True)
    in_tie = mask & np.take_along_axis(tied, votes, axis=1)
    first = np.argmax(in_tie, axis=1)
    return votes[np.arange(q), first]


def majority_vote(members, pattern) -> int:
    """Fuse the labels of ``members`` (an Ensemble or a sequence of models) on one pattern."""
    members = members.members if isinstance(members, Ensemble) else tuple(members)
    if not members:
        raise ValidationError("majority vote over an empty classifier subset")
    x = np.asarray(pattern, dtype=np.float64)[None, :]
    votes = np.array([[m.predict_batch(x)[0] for m in members]])
    return int(vote_labels(votes, n_classes=members[0].n_classes)[0])


def _check_nonempty(dataset):
    if dataset.n_samples < 1:
        raise ValidationError("empty evaluation set")


def member_accuracies(ensemble: Ensemble, dataset: Dataset) -> np.ndarray:
    _check_nonempty(dataset)
    return (ensemble.predictions(dataset.features) == dataset.labels[:, None]).mean(axis=0)


def oracle_accuracy(ensemble: Ensemble, test: Dataset) -> float:
    """Fraction of patterns that at least one member labels correctly."""
    _check_nonempty(test)
    hits = ensemble.predictions(test.features) == test.labels[:, None]
    return float(hits.any(axis=1).mean())


def single_best(ensemble: Ensemble, validation: Dataset) -> int:
    # argmax keeps the first maximum, i.e. the lowest index on ties
    return int(np.argmax(member_accuracies(ensemble, validation)))


def static_ensemble_accuracy(ensemble: Ensemble, test: Dataset) -> float:
    _check_nonempty(test)
    fused = vote_labels(ensemble.predictions(test.features), n_classes=test.n_classes)
    return float((fused == test.labels).mean())
