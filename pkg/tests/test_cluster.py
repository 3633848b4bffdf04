import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.cluster.hierarchy import linkage as scipy_linkage
from scipy.spatial.distance import squareform

from oracles import same_partition, threshold_components
from structura.cluster import LINKAGE_METHODS, cut, linkage
from structura.errors import InvalidMatrix

ABC = np.array([[0, 1, 5], [1, 0, 5], [5, 5, 0]], dtype=float)


def random_matrix(rng, n):
    m = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            m[i, j] = m[j, i] = rng.random()
    return m


def test_two_points():
    dgm = linkage(np.array([[0, 0.7], [0.7, 0]]), "single", ["x", "y"])
    assert len(dgm.merges) == 1
    assert dgm.merges[0].height == 0.7 and dgm.merges[0].size == 2


@pytest.mark.parametrize("method", ["single", "complete"])
def test_three_point_tree(method):
    dgm = linkage(ABC, method, ["A", "B", "C"])
    (m1, m2) = dgm.merges
    assert (m1.left, m1.right, m1.height) == (0, 1, 1.0)
    # the cluster holding the smaller leaf id goes left
    assert (m2.left, m2.right, m2.height) == (3, 2, 5.0)
    assert dgm.to_newick() == "((A:1.0,B:1.0):4.0,C:5.0);"


def test_three_point_cut():
    dgm = linkage(ABC, "single", ["A", "B", "C"])
    assert cut(dgm, 2).labels == {"A": 0, "B": 0, "C": 1}
    assert cut(dgm, 0.5).num_clusters == 3
    assert cut(dgm, 100).num_clusters == 1


def test_tie_break_lexicographic_and_repeatable():
    # every pair at distance 1: the first merge must be (a, b)
    d = np.ones((4, 4)) - np.eye(4)
    ids = ["d", "b", "a", "c"]
    runs = [linkage(d, "average", ids) for _ in range(3)]
    assert all(r.merges == runs[0].merges for r in runs)
    first = runs[0].merges[0]
    assert {ids[first.left], ids[first.right]} == {"a", "b"}


@pytest.mark.parametrize("bad", [
    np.array([[0, 1], [2, 0]]),
    np.array([[0, -1], [-1, 0]]),
    np.array([[0, np.nan], [np.nan, 0]]),
    np.array([[1, 1], [1, 1]]),
    np.zeros((2, 3)),
])
def test_invalid_matrix(bad):
    with pytest.raises(InvalidMatrix):
        linkage(bad, "single")


def test_unknown_method():
    with pytest.raises(ValueError):
        linkage(ABC, "ward")


@pytest.mark.parametrize("method", LINKAGE_METHODS)
@pytest.mark.parametrize("seed", range(20))
def test_heights_match_scipy(method, seed):
    rng = random.Random(seed)
    d = random_matrix(rng, rng.randint(2, 12))
    ours = [m.height for m in linkage(d, method).merges]
    ref = scipy_linkage(squareform(d), method)[:, 2]
    assert ours == pytest.approx(sorted(ref), abs=1e-12)


@pytest.mark.parametrize("method", LINKAGE_METHODS)
@pytest.mark.parametrize("seed", range(10))
def test_cut_matches_scipy_fcluster(method, seed):
    from scipy.cluster.hierarchy import fcluster
    rng = random.Random(100 + seed)
    d = random_matrix(rng, 10)
    z = scipy_linkage(squareform(d), method)
    for t in (0.1, 0.3, 0.5, 0.8):
        ours = cut(linkage(d, method), t).as_list([str(k) for k in range(10)])
        assert same_partition(ours, list(fcluster(z, t, "distance")))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 8), st.floats(0, 1))
def test_single_linkage_equals_threshold_graph(seed, n, t):
    d = random_matrix(random.Random(seed), n)
    ours = cut(linkage(d, "single"), t).as_list([str(k) for k in range(n)])
    assert same_partition(ours, threshold_components(d.tolist(), t))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 9), st.sampled_from(LINKAGE_METHODS))
def test_dendrogram_properties(seed, n, method):
    rng = random.Random(seed)
    # coarse grid values force ties
    d = np.round(random_matrix(rng, n) * 4) / 4
    ids = [f"t{k}" for k in range(n)]
    dgm = linkage(d, method, ids)
    assert len(dgm.merges) == n - 1
    heights = [m.height for m in dgm.merges]
    assert all(b >= a - 1e-12 for a, b in zip(heights, heights[1:]))
    assert dgm.merges[-1].size == n

    counts = [cut(dgm, t).num_clusters for t in np.linspace(0, 1.1, 12)]
    assert counts == sorted(counts, reverse=True)
    assert cut(dgm, float("inf")).num_clusters == 1
    if d[~np.eye(n, dtype=bool)].min() > 0:
        assert cut(dgm, 0.0).num_clusters == n

    labels = cut(dgm, 0.5).labels
    assert sorted(set(labels.values())) == list(range(len(set(labels.values()))))

    # permutation invariance, ties included
    perm = list(range(n))
    rng.shuffle(perm)
    dp = d[np.ix_(perm, perm)]
    idp = [ids[k] for k in perm]
    for t in (0.0, 0.25, 0.5, 0.75):
        a = cut(dgm, t).labels
        b = cut(linkage(dp, method, idp), t).labels
        assert same_partition([a[i] for i in ids], [b[i] for i in ids])


def test_labels_follow_input_order():
    d = np.array([[0, 9, 1], [9, 0, 9], [1, 9, 0]], dtype=float)
    a = cut(linkage(d, "single", ["x", "y", "z"]), 2)
    assert a.labels == {"x": 0, "y": 1, "z": 0}
    assert a.to_csv() == "transcription_id,cluster_label\nx,0\ny,1\nz,0\n"


def test_newick_quotes_awkward_names():
    dgm = linkage(np.array([[0, 1.0], [1.0, 0]]), "single", ["a b", "c"])
    assert dgm.to_newick() == "('a b':1.0,c:1.0);"
