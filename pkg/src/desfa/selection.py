"""KNORA-Eliminate selection and the three dynamic-selection pipelines.

Competence is read from the index's precomputed correctness matrix; base
classifiers are never re-run inside the k-reduction loop.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import constants as K
from .competence import CompetenceIndex, Neighbor, adaptive_knn, knn
from .ensemble import Ensemble, vote_labels
from .errors import ValidationError


@dataclass(frozen=True)
class SelectionOutcome:
    selected: tuple
    final_k: int
    reductions: int
    fallback_used: bool


def knora_eliminate(index: CompetenceIndex, neighbors, initial_k=None) -> SelectionOutcome:
    """Keep the members correct on every one of the first k' neighbors,
    shrinking k' (farthest neighbor first) until someone qualifies.
    """
    nb = [n.index if isinstance(n, Neighbor) else int(n) for n in neighbors]
    initial_k = len(nb) if initial_k is None else initial_k
    if initial_k < 1:
        raise ValidationError(f"initial k must be >= 1, got {initial_k}")
    if len(nb) < initial_k:
        raise ValidationError(f"{len(nb)} neighbors given for initial k={initial_k}")
    if index.correctness is None:
        raise ValidationError("index has no correctness matrix")
    hits = index.correctness[:, nb[:initial_k]]
    k = initial_k
    while True:
        sel = np.flatnonzero(hits[:, :k].all(axis=1))
        if sel.size:
            return SelectionOutcome(tuple(int(j) for j in sel), k, initial_k - k, False)
        if k == 1:
            return SelectionOutcome((), 1, initial_k - 1, True)
        k -= 1


def eliminate_batch(correctness, neighbor_idx):
    """Vectorised KNORA-E over a (Q, k) neighbor matrix.

    Returns ``(selected, final_k, fallback)`` with ``selected`` a (Q, L)
    mask. Because "correct on all of the first k' neighbors" only loses
    members as k' grows, the largest admissible k' equals the number of
    prefix lengths that leave someone selected.
    """
    hits = correctness[:, neighbor_idx]                  # (L, Q, k)
    prefix = np.logical_and.accumulate(hits, axis=2)
    admissible = prefix.any(axis=0)                      # (Q, k)
    final_k = admissible.sum(axis=1)
    fallback = final_k == 0
    final_k = np.maximum(final_k, 1)
    q = neighbor_idx.shape[0]
    selected = prefix[:, np.arange(q), final_k - 1].T    # (Q, L)
    selected[fallback] = False
    return selected, final_k, fallback


@dataclass
class BatchResult:
    labels: np.ndarray
    final_k: np.ndarray
    reductions: np.ndarray
    fallback: np.ndarray
    selected: np.ndarray
    neighbors: np.ndarray
    effective: np.ndarray

    def trace_records(self, method=""):
        for q in range(self.labels.shape[0]):
            yield {
                "method": method,
                "query": q,
                "neighbors": self.neighbors[q].tolist(),
                "effective_distances": self.effective[q].tolist(),
                "reductions": int(self.reductions[q]),
                "selected": np.flatnonzero(self.selected[q]).tolist(),
                "fallback": bool(self.fallback[q]),
                "label": int(self.labels[q]),
            }


def classify_batch(ensemble: Ensemble, index: CompetenceIndex, queries, k=K.NEIGHBORS,
                   adaptive=False, predictions=None) -> BatchResult:
    """Label every query with KNORA-E over ``index``.

    ``predictions`` may carry the (Q, L) member labels for ``queries``.
    ``k`` is capped at the index size. A query for which no member survives
    at k'=1 is labelled by the full-ensemble vote.
    """
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    k = min(k, index.size)
    idx, _, eff = index.neighbors_batch(queries, k, adaptive=adaptive)
    selected, final_k, fallback = eliminate_batch(index.correctness, idx)
    if predictions is None:
        predictions = ensemble.predictions(queries)
    mask = selected.copy()
    mask[fallback] = True
    n_classes = ensemble.members[0].n_classes
    labels = vote_labels(predictions, mask, n_classes)
    return BatchResult(labels, final_k, k - final_k, fallback, selected, idx, eff)


def _classify_one(ensemble, index, query, k, search):
    k = min(k, index.size)
    outcome = knora_eliminate(index, search(index, query, k), k)
    members = ensemble.members if outcome.fallback_used else [ensemble.members[j] for j in outcome.selected]
    votes = np.array([[m.predict_batch(np.asarray(query, float)[None, :])[0] for m in members]])
    return int(vote_labels(votes, n_classes=ensemble.members[0].n_classes)[0])


def classify_knora_e(ensemble, index, query, k=K.NEIGHBORS) -> int:
    """KNORA-E with plain Euclidean neighbors over the unfiltered validation set."""
    return _classify_one(ensemble, index, query, k, knn)


def classify_aknn_knora(ensemble, index, query, k=K.NEIGHBORS) -> int:
    """KNORA-E with adaptive-distance neighbors over the unfiltered validation set."""
    return _classify_one(ensemble, index, query, k, adaptive_knn)


def classify_des_fa(ensemble, index, query, k=K.NEIGHBORS) -> int:
    """DES-FA: ``index`` must be built over the ENN-edited validation set
    (see :func:`desfa.competence.build_filtered_index`).
    """
    return _classify_one(ensemble, index, query, k, adaptive_knn)
