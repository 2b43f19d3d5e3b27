import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from desfa.competence import CompetenceIndex, build_filtered_index, build_index
from desfa.datasets import Dataset, generate_banana, split_train_validation
from desfa.ensemble import bagging, majority_vote
from desfa.errors import ValidationError
from desfa.selection import (classify_aknn_knora, classify_batch, classify_des_fa, classify_knora_e,
                             eliminate_batch, knora_eliminate)
from tests import oracles as bf


def index_with(correctness):
    C = np.asarray(correctness, bool)
    n = C.shape[1]
    ref = Dataset("c", np.arange(n, dtype=float)[:, None], np.arange(n) % 2, 2)
    return CompetenceIndex(ref, None, C)


def test_hand_example_reduces_once():
    index = index_with([[1, 1, 0], [0, 1, 1]])
    out = knora_eliminate(index, [0, 1, 2], 3)
    assert out.selected == (0,)
    assert (out.final_k, out.reductions, out.fallback_used) == (2, 1, False)


def test_all_correct_keeps_everyone_without_reduction():
    out = knora_eliminate(index_with(np.ones((4, 5))), range(5), 5)
    assert out.selected == (0, 1, 2, 3) and out.reductions == 0


def test_fallback_when_nobody_is_right_on_nearest():
    C = np.ones((3, 4), bool)
    C[:, 2] = False
    out = knora_eliminate(index_with(C), [2, 0, 1, 3], 4)
    assert out == type(out)((), 1, 3, True)


def test_rejects_bad_k():
    index = index_with(np.ones((2, 3)))
    with pytest.raises(ValidationError):
        knora_eliminate(index, [0, 1, 2], 0)
    with pytest.raises(ValidationError):
        knora_eliminate(index, [0, 1], 3)


@settings(max_examples=500)
@given(C=hnp.arrays(bool, st.tuples(st.integers(1, 10), st.integers(1, 12))), data=st.data())
def test_knora_sound_maximal_and_matches_oracle(C, data):
    L, n = C.shape
    k = data.draw(st.integers(1, n))
    nb = data.draw(st.permutations(range(n)))[:k]
    out = knora_eliminate(index_with(C), nb, k)
    sel, kk, fb = bf.knora_e(C.tolist(), nb, k)
    assert (list(out.selected), out.final_k, out.fallback_used) == (sel, kk, fb)
    assert out.reductions == k - out.final_k
    if not fb:
        # soundness
        assert all(C[j, nb[:kk]].all() for j in out.selected)
        # maximality in k' and in the member set
        if kk < k:
            assert not bf.knora_members(C.tolist(), nb, kk + 1)
        assert len(out.selected) == sum(C[j, nb[:kk]].all() for j in range(L))
    # vectorised path agrees
    s, fk, f = eliminate_batch(C, np.array([nb]))
    assert (fk[0], bool(f[0])) == (out.final_k, out.fallback_used)
    assert np.flatnonzero(s[0]).tolist() == list(out.selected)


@pytest.fixture(scope="module")
def problem():
    data = generate_banana(300, seed=4)
    T, rest = split_train_validation(data, 0.5, seed=1)
    V, test = split_train_validation(rest, 0.5, seed=2)
    ens = bagging(T, 10, seed=3)
    return ens, V, test


@pytest.mark.parametrize("adaptive", [False, True])
def test_batch_path_equals_single_query_path(problem, adaptive):
    ens, V, test = problem
    index = build_index(V, ens, adaptive=adaptive)
    res = classify_batch(ens, index, test.features, 7, adaptive=adaptive)
    single = classify_aknn_knora if adaptive else classify_knora_e
    assert res.labels.tolist() == [single(ens, index, x, 7) for x in test.features]
    assert np.all(res.reductions == 7 - res.final_k)


def test_des_fa_uses_filtered_reference(problem):
    ens, V, test = problem
    index = build_filtered_index(V, ens, 3)
    assert index.size < V.n_samples
    res = classify_batch(ens, index, test.features, 7, adaptive=True)
    assert res.labels.tolist() == [classify_des_fa(ens, index, x) for x in test.features]


def test_fallback_votes_full_ensemble(problem):
    ens, V, test = problem
    index = build_index(V, ens)
    broken = CompetenceIndex(index.reference, index.radii, np.zeros_like(index.correctness))
    res = classify_batch(ens, broken, test.features[:20], 7)
    assert res.fallback.all() and np.all(res.reductions == 6)
    assert res.labels.tolist() == [majority_vote(ens, x) for x in test.features[:20]]


def test_k_is_capped_at_reference_size(problem):
    ens, V, _ = problem
    small = build_index(V.subset(range(4)), ens, adaptive=False)
    res = classify_batch(ens, small, V.features[:3], 7)
    assert res.neighbors.shape == (3, 4)


def test_trace_records_have_stable_fields(problem):
    ens, V, test = problem
    res = classify_batch(ens, build_index(V, ens), test.features[:2], 7, adaptive=True)
    rec = next(res.trace_records("aknn-knora-e"))
    assert set(rec) == {"method", "query", "neighbors", "effective_distances", "reductions",
                        "selected", "fallback", "label"}
    assert len(rec["neighbors"]) == 7
