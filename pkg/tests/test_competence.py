import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from desfa.competence import (EmptiedClassWarning, adaptive_knn, build_correctness_matrix,
                              build_filtered_index, build_index, compute_radii, enn_filter,
                              enn_keep_mask, knn)
from desfa.datasets import Dataset, generate_two_gaussians
from desfa.ensemble import Ensemble
from desfa.errors import ValidationError
from desfa.perceptron import Perceptron
from tests import oracles as bf


def ds1d(xs, ys, n_classes=None):
    return Dataset("t", np.array(xs, float)[:, None], ys, n_classes or max(ys) + 1)


def random_dataset(seed, n, d, c):
    r = np.random.default_rng(seed)
    X = r.normal(size=(n, d))
    y = r.integers(0, c, n)
    y[:c] = np.arange(c)
    return Dataset("rand", X, y, c)


# ---------------------------------------------------------------- ENN

def test_enn_hand_traced_1d():
    V = ds1d([0.0, 0.2, 0.21, 5.0, 6.0], [0, 0, 1, 1, 1])
    S = enn_filter(V, 1)
    assert S.features[:, 0].tolist() == [0.0, 5.0, 6.0]
    assert S.labels.tolist() == [0, 1, 1]


def test_enn_single_class_keeps_everything():
    V = Dataset("one", np.random.default_rng(0).normal(size=(20, 2)), np.zeros(20, int), 2)
    assert enn_keep_mask(V, 3).all()


def test_enn_two_gaussians_removes_only_boundary_points():
    V = generate_two_gaussians(200, seed=3)
    keep = enn_keep_mask(V, 1)
    assert 0 < (~keep).sum() < V.n_samples
    # every removed point has a cross-class nearest neighbor
    X, y = V.features, V.labels
    for i in np.flatnonzero(~keep):
        d = np.linalg.norm(X - X[i], axis=1)
        d[i] = np.inf
        assert y[np.argmin(d)] != y[i]
    # class cores survive: points near each mean are kept
    for c, mu in enumerate(([0.0, 0.0], [3.5, 0.0])):
        core = (y == c) & (np.linalg.norm(X - mu, axis=1) < 0.5)
        assert keep[core].all()


@pytest.mark.parametrize("k", [0, 5, 6])
def test_enn_rejects_bad_k(k):
    V = ds1d([0, 1, 2, 3, 4], [0, 0, 1, 1, 1])
    with pytest.raises(ValidationError):
        enn_filter(V, k)


def test_enn_warns_when_a_class_vanishes():
    # a lone class-2 point sitting inside class 0
    V = ds1d([0.0, 0.1, 0.2, 0.15, 5.0, 5.1], [0, 0, 0, 2, 1, 1])
    with pytest.warns(EmptiedClassWarning):
        S = enn_filter(V, 1)
    assert 2 not in S.labels


def test_enn_vote_tie_goes_to_nearest_class():
    # k=2 around the query point 0: neighbors B at 1.0 (nearest) and A at 1.5
    V = ds1d([0.0, 1.0, -1.5, 10.0, 11.0], [0, 1, 0, 1, 0])
    keep = enn_keep_mask(V, 2)
    assert not keep[0]


@settings(max_examples=200)
@given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(8, 300), d=st.integers(1, 5),
       c=st.integers(2, 4), k=st.sampled_from([1, 2, 3, 5, 7]))
def test_enn_matches_brute_force(seed, n, d, c, k):
    V = random_dataset(seed, n, d, c)
    keep = enn_keep_mask(V, k)
    assert keep.tolist() == bf.enn_keep(V.features.tolist(), V.labels.tolist(), k)
    if keep.any():
        S = enn_filter(V, k) if np.unique(V.labels[keep]).size == np.unique(V.labels).size else None
        if S is not None:
            # subset property: every kept row is a row of V with its label
            rows = {tuple(x) + (c_,) for x, c_ in zip(V.features, V.labels)}
            assert all(tuple(x) + (c_,) in rows for x, c_ in zip(S.features, S.labels))
            assert S.n_samples == keep.sum()


# -------------------------------------------------------------- radii

def test_radii_hand_example():
    R = compute_radii(ds1d([0.0, 3.0, 4.0], [0, 1, 0]))
    assert R.tolist() == [3.0, 1.0, 1.0]


def test_radii_cross_class_duplicate_is_zero_and_marked():
    ref = ds1d([0.0, 0.0, 2.0], [0, 1, 1])
    index = build_index(ref)
    assert index.radii[0] == 0.0 and index.radii[1] == 0.0
    assert index.infinite_adaptive.tolist() == [True, True, False]


def test_radii_single_class_rejected():
    with pytest.raises(ValidationError):
        compute_radii(Dataset("one", np.zeros((3, 1)), [0, 0, 0], 2))


def test_radii_random_50_point_set_equals_double_loop():
    ref = random_dataset(7, 50, 2, 2)
    assert compute_radii(ref).tolist() == pytest.approx(bf.radii(ref.features, ref.labels), abs=1e-12)


@settings(max_examples=200)
@given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(2, 200), d=st.integers(1, 5), c=st.integers(2, 4))
def test_radii_brute_force_and_safety(seed, n, d, c):
    ref = random_dataset(seed, max(n, c), d, c)
    R = compute_radii(ref)
    np.testing.assert_allclose(R, bf.radii(ref.features, ref.labels), rtol=1e-12, atol=1e-12)
    X, y = ref.features, ref.labels
    D = np.linalg.norm(X[:, None] - X[None], axis=2)
    cross = y[:, None] != y[None]
    assert np.all(D[cross] >= np.broadcast_to(R[:, None], D.shape)[cross] - 1e-12)


# ----------------------------------------------------------- k-NN queries

def test_knn_query_on_reference_point():
    ref = ds1d([0.0, 3.0, 4.0], [0, 1, 0])
    nb = knn(build_index(ref), [3.0], 1)
    assert (nb[0].index, nb[0].distance) == (1, 0.0)


def test_knn_full_reference_sorted_with_index_ties():
    ref = ds1d([1.0, -1.0, 2.0, 0.5], [0, 1, 0, 1])
    nb = knn(build_index(ref), [0.0], 4)
    assert [n.index for n in nb] == [3, 0, 1, 2]


def test_knn_rejects_bad_k():
    index = build_index(ds1d([0.0, 1.0], [0, 1]))
    for k in (0, 3):
        with pytest.raises(ValidationError):
            knn(index, [0.0], k)


def test_knn_100_points_equals_brute_force():
    ref = random_dataset(11, 100, 3, 3)
    index = build_index(ref)
    q = np.random.default_rng(5).normal(size=3)
    assert [n.index for n in knn(index, q, 7)] == bf.knn(ref.features, q, 7)


def test_adaptive_hand_example():
    ref = ds1d([0.0, 3.0, 4.0], [0, 1, 0])
    index = build_index(ref)
    a = adaptive_knn(index, [2.0], 1)[0]
    assert a.index == 0
    assert a.effective == pytest.approx(2 / 3)
    assert knn(index, [2.0], 1)[0].index == 1
    effs = [n.effective for n in adaptive_knn(index, [2.0], 3)]
    assert effs == pytest.approx([2 / 3, 1.0, 2.0])


def test_adaptive_equal_radii_matches_plain():
    # symmetric layout: every radius is 1
    ref = ds1d([0.0, 1.0, 2.0, 3.0, 4.0, 5.0], [0, 1, 0, 1, 0, 1])
    index = build_index(ref)
    assert np.all(index.radii == 1.0)
    for q in np.linspace(-1, 6, 29):
        assert [n.index for n in adaptive_knn(index, [q], 6)] == [n.index for n in knn(index, [q], 6)]


def test_adaptive_infinite_patterns_sort_last():
    ref = ds1d([0.0, 0.0, 2.0, 9.0], [0, 1, 1, 0])
    order = [n.index for n in adaptive_knn(build_index(ref), [0.0], 4)]
    assert order[-2:] == [0, 1]


def test_adaptive_100_points_equals_brute_force():
    ref = random_dataset(13, 100, 2, 2)
    index = build_index(ref)
    q = np.random.default_rng(6).normal(size=2)
    assert [n.index for n in adaptive_knn(index, q, 7)] == bf.adaptive_knn(ref.features, index.radii, q, 7)


@settings(max_examples=200)
@given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(4, 300), d=st.integers(1, 5),
       c=st.integers(2, 4), k=st.integers(1, 9))
def test_neighbor_orders_match_brute_force(seed, n, d, c, k):
    ref = random_dataset(seed, n, d, c)
    k = min(k, n)
    index = build_index(ref)
    queries = np.random.default_rng(seed + 1).normal(size=(3, d))
    for q in queries:
        assert [x.index for x in knn(index, q, k)] == bf.knn(ref.features, q, k)
        assert [x.index for x in adaptive_knn(index, q, k)] == bf.adaptive_knn(ref.features, index.radii, q, k)


def test_oracle_equivalence_at_n_1000():
    ref = random_dataset(99, 1000, 3, 3)
    index = build_index(ref)
    for q in np.random.default_rng(1).normal(size=(5, 3)):
        assert [x.index for x in knn(index, q, 7)] == bf.knn(ref.features, q, 7)
        assert [x.index for x in adaptive_knn(index, q, 7)] == bf.adaptive_knn(ref.features, index.radii, q, 7)


@settings(max_examples=100)
@given(seed=st.integers(0, 2 ** 32 - 1), scale=st.sampled_from([0.5, 2.0, 4.0, 1024.0, 2.0 ** -10]))
def test_common_scaling_preserves_both_orders(seed, scale):
    # power-of-two factors scale floating-point distances exactly
    ref = random_dataset(seed, 60, 3, 3)
    scaled = ref.with_features(ref.features * scale)
    a, b = build_index(ref), build_index(scaled)
    q = np.random.default_rng(seed).normal(size=3)
    assert [x.index for x in knn(a, q, 9)] == [x.index for x in knn(b, q * scale, 9)]
    assert [x.index for x in adaptive_knn(a, q, 9)] == [x.index for x in adaptive_knn(b, q * scale, 9)]


@settings(max_examples=50)
@given(seed=st.integers(0, 2 ** 32 - 1), scale=st.floats(0.01, 100))
def test_common_scaling_any_factor(seed, scale):
    ref = random_dataset(seed, 40, 2, 2)
    a, b = build_index(ref), build_index(ref.with_features(ref.features * scale))
    q = np.random.default_rng(seed).normal(size=2)
    pa, pb = a.neighbors_batch(q, 7, adaptive=True), b.neighbors_batch(q * scale, 7, adaptive=True)
    # orders agree except where effective distances tie to rounding
    np.testing.assert_allclose(pa[2], pb[2], rtol=1e-9)


# -------------------------------------------------------- correctness

def constant_model(label, n_classes=2, d=1):
    W = np.zeros((n_classes, d))
    b = np.zeros(n_classes)
    b[label] = 1.0
    return Perceptron(W, b, np.zeros(d), np.ones(d))


def threshold_model():
    # class 1 iff x > 0.5 on the [0, 1] scale
    return Perceptron(np.array([[-1.0], [1.0]]), np.array([0.5, -0.5]), np.zeros(1), np.ones(1))


def test_correctness_matrix_rows():
    ref = ds1d([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1])
    ens = Ensemble((threshold_model(), constant_model(1)), (0, 1))
    C = build_correctness_matrix(ens, ref)
    assert C[0].all()
    assert C[1].tolist() == [False, False, True, True]


def test_correctness_matrix_spot_checks_against_predict():
    from desfa.datasets import generate_banana
    from desfa.ensemble import bagging
    data = generate_banana(200, seed=1)
    ens = bagging(data, 5, seed=2)
    C = build_correctness_matrix(ens, data)
    r = np.random.default_rng(0)
    for _ in range(50):
        j, i = r.integers(5), r.integers(200)
        from desfa.perceptron import predict
        assert C[j, i] == (predict(ens.members[j], data.features[i]) == data.labels[i])


def test_filtered_index_dump(tmp_path):
    V = ds1d([0.0, 0.2, 0.21, 5.0, 6.0], [0, 0, 1, 1, 1])
    ens = Ensemble((threshold_model(),), (0,))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        index = build_filtered_index(V, ens, 1)
    assert index.size == 3 and index.correctness.shape == (1, 3)
    lines = index.dump_csv(tmp_path / "idx.csv").read_text().splitlines()
    assert lines[0] == "x0,label,radius,kept"
    assert [ln.rsplit(",", 1)[1] for ln in lines[1:]] == ["1", "0", "0", "1", "1"]
    assert lines[2].split(",")[2] == ""
