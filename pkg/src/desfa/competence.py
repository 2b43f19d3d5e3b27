"""Region of competence: ENN editing, per-pattern radii and k-NN queries.

All neighbor searches are exhaustive scans over Euclidean distances, with
distance ties broken by the lower reference index.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from .datasets import Dataset
from .errors import ValidationError


class EmptiedClassWarning(UserWarning):
    """ENN editing removed every pattern of some class."""


def distances(A, B) -> np.ndarray:
    return cdist(np.atleast_2d(A), np.atleast_2d(B), "euclidean")


def _sorted_neighbors(dist, k, last=None):
    """Row-wise indices of the k smallest entries; ties by column index.

    ``last`` is an optional boolean column mask pushed behind every
    unmasked column regardless of value.
    """
    order = np.argsort(dist, axis=1, kind="stable")
    if last is not None and last.any():
        flag = last[order]
        order = np.take_along_axis(order, np.argsort(flag, axis=1, kind="stable"), axis=1)
    return order[:, :k]


def knn_vote(neighbor_labels, n_classes) -> np.ndarray:
    """Majority label per row of a (Q, k) matrix ordered nearest-first.

    A tie goes to the class of the nearest neighbor among the tied classes.
    """
    neighbor_labels = np.atleast_2d(neighbor_labels)
    q = neighbor_labels.shape[0]
    counts = np.zeros((q, n_classes), dtype=np.int64)
    rows = np.broadcast_to(np.arange(q)[:, None], neighbor_labels.shape)
    np.add.at(counts, (rows, neighbor_labels), 1)
    tied = counts == counts.max(axis=1, keepdims=True)
    first = np.argmax(np.take_along_axis(tied, neighbor_labels, axis=1), axis=1)
    return neighbor_labels[np.arange(q), first]


def loo_knn_predictions(features, labels, n_classes, k, chunk=512) -> np.ndarray:
    """k-NN label of every row using all other rows as reference."""
    n = features.shape[0]
    out = np.empty(n, dtype=np.int64)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        d = distances(features[start:stop], features)
        rows = np.arange(stop - start)
        d[rows, rows + start] = np.inf
        # self goes behind everything, even other infinite distances
        self_mask = np.zeros_like(d, dtype=bool)
        self_mask[rows, rows + start] = True
        order = np.argsort(d, axis=1, kind="stable")
        flag = np.take_along_axis(self_mask, order, axis=1)
        order = np.take_along_axis(order, np.argsort(flag, axis=1, kind="stable"), axis=1)[:, :k]
        out[start:stop] = knn_vote(labels[order], n_classes)
    return out


def enn_keep_mask(V: Dataset, k_enn: int) -> np.ndarray:
    if k_enn < 1:
        raise ValidationError(f"k_enn must be >= 1, got {k_enn}")
    if k_enn >= V.n_samples:
        raise ValidationError(f"k_enn={k_enn} needs more than {k_enn} patterns, got {V.n_samples}")
    pred = loo_knn_predictions(V.features, V.labels, V.n_classes, k_enn)
    return pred == V.labels


def enn_filter(V: Dataset, k_enn: int) -> Dataset:
    """Edited Nearest Neighbor: keep the patterns that their k_enn nearest
    other patterns of ``V`` classify correctly.

    All decisions use the original ``V``; removals do not cascade.
    """
    return _apply_keep(V, enn_keep_mask(V, k_enn), k_enn)


def _apply_keep(V, keep, k_enn):
    if not keep.any():
        raise ValidationError(f"ENN (k={k_enn}) removed every pattern")
    lost = sorted(set(np.unique(V.labels).tolist()) - set(np.unique(V.labels[keep]).tolist()))
    if lost:
        names = [V.label_names[c] for c in lost]
        warnings.warn(f"ENN (k={k_enn}) removed every pattern of class(es) {names}",
                      EmptiedClassWarning, stacklevel=3)
    return V.subset(np.flatnonzero(keep), f"{V.name}/enn{k_enn}")


def compute_radii(reference: Dataset) -> np.ndarray:
    """Distance from each pattern to its nearest pattern of another class.

    Zero means a cross-class duplicate exists.
    """
    if np.unique(reference.labels).size < 2:
        raise ValidationError("radii need at least two classes in the reference set")
    d = distances(reference.features, reference.features)
    same = reference.labels[:, None] == reference.labels[None, :]
    d[same] = np.inf
    return d.min(axis=1)


@dataclass(frozen=True)
class Neighbor:
    index: int
    distance: float
    effective: float


@dataclass(frozen=True, eq=False)
class CompetenceIndex:
    reference: Dataset
    radii: np.ndarray | None = None
    correctness: np.ndarray | None = None   # (L, N) bool
    flags: dict = field(default_factory=dict)
    source: Dataset | None = None            # unfiltered set, when edited
    kept: np.ndarray | None = None

    @property
    def size(self) -> int:
        return self.reference.n_samples

    @property
    def infinite_adaptive(self) -> np.ndarray:
        if self.radii is None:
            raise ValidationError("index was built without radii")
        return self.radii <= 0

    def neighbors_batch(self, queries, k, adaptive=False):
        """(indices, raw, effective) arrays of shape (Q, k)."""
        if not 1 <= k <= self.size:
            raise ValidationError(f"k must be in [1, {self.size}], got {k}")
        queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
        if queries.shape[1] != self.reference.n_features:
            raise ValidationError(
                f"queries have {queries.shape[1]} features, index has {self.reference.n_features}")
        raw = distances(queries, self.reference.features)
        if not adaptive:
            idx = _sorted_neighbors(raw, k)
            d = np.take_along_axis(raw, idx, axis=1)
            return idx, d, d
        inf_ad = self.infinite_adaptive
        with np.errstate(divide="ignore", invalid="ignore"):
            eff = raw / np.where(inf_ad, 1.0, self.radii)
        eff[:, inf_ad] = np.inf
        idx = _sorted_neighbors(eff, k, last=inf_ad)
        return idx, np.take_along_axis(raw, idx, axis=1), np.take_along_axis(eff, idx, axis=1)

    def dump_csv(self, path) -> Path:
        """One row per source pattern: features, label, radius, ENN kept flag.

        Removed patterns have an empty radius.
        """
        path = Path(path)
        source = self.source if self.source is not None else self.reference
        kept = self.kept if self.kept is not None else np.ones(source.n_samples, dtype=bool)
        radius = np.full(source.n_samples, np.nan)
        if self.radii is not None:
            radius[np.flatnonzero(kept)] = self.radii
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"x{j}" for j in range(source.n_features)] + ["label", "radius", "kept"])
            for x, c, r, k in zip(source.features, source.labels, radius, kept):
                w.writerow([repr(float(v)) for v in x]
                           + [source.label_names[c], "" if np.isnan(r) else repr(float(r)), int(k)])
        return path


def build_index(reference: Dataset, ensemble=None, adaptive=True) -> CompetenceIndex:
    flags = {}
    radii = None
    if adaptive:
        if np.unique(reference.labels).size < 2:
            # adaptive ordering is undefined; fall back to plain distances
            radii = np.ones(reference.n_samples)
            flags["single_class_reference"] = True
        else:
            radii = compute_radii(reference)
    correctness = build_correctness_matrix(ensemble, reference) if ensemble is not None else None
    return CompetenceIndex(reference, radii, correctness, flags)


def build_filtered_index(V: Dataset, ensemble, k_enn, adaptive=True) -> CompetenceIndex:
    """ENN-edit ``V`` and index the survivors (the DES-FA reference set)."""
    keep = enn_keep_mask(V, k_enn)
    filtered = _apply_keep(V, keep, k_enn)
    index = build_index(filtered, ensemble, adaptive)
    index.flags["emptied_class"] = np.unique(filtered.labels).size < np.unique(V.labels).size
    return CompetenceIndex(filtered, index.radii, index.correctness, index.flags, V, keep)


def _to_list(idx, raw, eff):
    return [Neighbor(int(i), float(r), float(e)) for i, r, e in zip(idx[0], raw[0], eff[0])]


def knn(index: CompetenceIndex, query, k) -> list[Neighbor]:
    return _to_list(*index.neighbors_batch(np.asarray(query, dtype=np.float64)[None, :], k))


def adaptive_knn(index: CompetenceIndex, query, k) -> list[Neighbor]:
    """k smallest ``distance / radius``; zero-radius patterns rank last."""
    if index.radii is None:
        raise ValidationError("adaptive k-NN needs an index built with radii")
    return _to_list(*index.neighbors_batch(np.asarray(query, dtype=np.float64)[None, :], k, adaptive=True))


def build_correctness_matrix(ensemble, reference: Dataset) -> np.ndarray:
    if reference.n_samples < 1:
        raise ValidationError("empty reference set")
    return ensemble.predictions(reference.features).T == reference.labels[None, :]
