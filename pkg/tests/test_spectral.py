import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from robustkc.core import DenoisedMatrix, ParameterError
from robustkc.spectral import KMeansConfig, cluster, embed, kmeans, kmeanspp_init, normalize_rows

from oracles import kmeans_brute, same_partition


def block_matrix(sizes, outliers=0):
    n = sum(sizes) + outliers
    X = np.zeros((n, n))
    start = 0
    labels = []
    for k, s in enumerate(sizes):
        X[start : start + s, start : start + s] = 1
        labels += [k] * s
        start += s
    for i in range(start, n):
        X[i, i] = 1
    return X, np.array(labels)


@pytest.mark.parametrize("sizes", [s for r in (2, 3, 4) for s in itertools.product((1, 2, 3), repeat=r) if sum(s) <= 12])
def test_exact_recovery_block_diagonal(sizes):
    X, truth = block_matrix(sizes)
    perm = np.random.default_rng(sum(sizes)).permutation(len(truth))
    X = X[np.ix_(perm, perm)]
    res = cluster(DenoisedMatrix(X, 0.5, "LP"), len(sizes))
    assert same_partition(res.labels, truth[perm])


def test_embed_spans_block_indicators():
    X, truth = block_matrix((3, 4, 2))
    U = embed(DenoisedMatrix(X, 0.5, "LP"), 3)
    Z = np.eye(3)[truth]
    # U and the normalized membership matrix span the same subspace
    Zn = Z / np.sqrt(Z.sum(0))
    assert np.allclose(U @ U.T, Zn @ Zn.T, atol=1e-10)


@pytest.mark.parametrize("seed", range(20))
def test_kmeans_close_to_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 11))
    r = int(rng.integers(2, 4))
    P = rng.standard_normal((n, 2))
    _, cost = kmeans(P, r, KMeansConfig(seed=seed))
    best = kmeans_brute(P, r)
    assert cost <= 1.05 * best + 1e-12


def test_kmeans_labels_and_determinism():
    P = np.random.default_rng(1).standard_normal((50, 3))
    a = kmeans(P, 4, KMeansConfig(seed=3))
    b = kmeans(P, 4, KMeansConfig(seed=3))
    assert np.array_equal(a[0], b[0]) and a[1] == b[1]
    assert set(a[0]) == {1, 2, 3, 4}


def test_kmeans_cost_monotone_per_restart():
    P = np.random.default_rng(2).standard_normal((80, 2))
    _, _, hist = kmeans(P, 5, KMeansConfig(restarts=3), return_history=True)
    for h in hist:
        assert all(b <= a + 1e-9 for a, b in zip(h, h[1:]))


def test_kmeans_no_empty_clusters_with_duplicates():
    P = np.array([[0.0, 0.0]] * 6 + [[1.0, 1.0]])
    labels, _ = kmeans(P, 3, KMeansConfig(restarts=2))
    assert set(labels) == {1, 2, 3}


def test_kmeans_errors():
    with pytest.raises(ParameterError):
        kmeans(np.zeros((3, 2)), 4)
    with pytest.raises(ParameterError):
        KMeansConfig(restarts=0)


def test_kmeanspp_init_picks_distinct_points():
    P = np.array([[0.0], [0.0], [10.0], [20.0]])
    C = kmeanspp_init(P, 3, np.random.default_rng(0))
    assert len({float(c) for c in C[:, 0]}) == 3


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 30), st.integers(1, 5), st.integers(0, 1000))
def test_normalize_rows_unit_or_zero(n, k, seed):
    U = np.random.default_rng(seed).standard_normal((n, k))
    U[0] = 0
    P = normalize_rows(U)
    norms = np.linalg.norm(P, axis=1)
    assert norms[0] == 0
    assert np.allclose(norms[1:], 1)


def test_cluster_permutation_equivariant():
    X, truth = block_matrix((4, 3, 5), outliers=2)
    perm = np.random.default_rng(0).permutation(len(X))
    a = cluster(DenoisedMatrix(X, 0.5, "LP"), 3).labels
    b = cluster(DenoisedMatrix(X[np.ix_(perm, perm)], 0.5, "LP"), 3).labels
    assert same_partition(a[perm], b)
