import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from graphsampling.graph import (
    DegreeZeroError,
    Graph,
    GraphFormatError,
    build_laplacian,
    community_sizes,
    connected_components,
    gen_binary_tree,
    gen_community,
    gen_cycle,
    gen_path,
    knn_graph,
    load_features,
    load_graph,
    save_graph,
)


def _generators():
    return [
        gen_path(50),
        gen_cycle(40),
        gen_binary_tree(5),
        gen_community([20, 30, 15], p_in=0.5, p_out=0.02, seed=3),
        knn_graph(np.random.default_rng(0).normal(size=(80, 3)), 5),
    ]


def test_path3_combinatorial():
    L = build_laplacian(gen_path(3)).toarray()
    np.testing.assert_array_equal(L, [[1, -1, 0], [-1, 2, -1], [0, -1, 1]])


def test_single_edge_normalized():
    g = Graph(2, sp.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]])))
    np.testing.assert_allclose(build_laplacian(g, "normalized").toarray(), [[1, -1], [-1, 1]], atol=1e-15)


@pytest.mark.parametrize("n", [3, 8, 100])
def test_cycle_spectrum_matches_circulant_formula(n):
    lam = np.linalg.eigvalsh(build_laplacian(gen_cycle(n)).toarray())
    expected = np.sort(2 - 2 * np.cos(2 * np.pi * np.arange(n) / n))
    np.testing.assert_allclose(lam, expected, atol=1e-10)


def test_triangle_spectrum():
    np.testing.assert_allclose(np.linalg.eigvalsh(build_laplacian(gen_cycle(3)).toarray()), [0, 3, 3], atol=1e-12)


def test_cycle100_multiplicities():
    lam = np.linalg.eigvalsh(build_laplacian(gen_cycle(100)).toarray())
    assert np.sum(np.abs(lam) < 1e-10) == 1
    for j in range(1, 50):
        assert np.sum(np.abs(lam - (2 - 2 * np.cos(2 * np.pi * j / 100))) < 1e-9) == 2


@pytest.mark.parametrize("g", _generators(), ids=["path", "cycle", "tree", "community", "knn"])
def test_generator_invariants(g):
    W = g.weights
    assert (W != W.T).nnz == 0
    assert W.data.min() >= 0
    assert np.all(W.diagonal() == 0)
    L = build_laplacian(g)
    assert (L.operator != L.operator.T).nnz == 0
    assert np.abs(L @ np.ones(g.n)).max() <= 1e-12 * g.degrees.max()
    np.testing.assert_array_equal(L.operator.diagonal(), g.degrees)
    assert np.linalg.eigvalsh(L.toarray()).min() >= -1e-10


@pytest.mark.parametrize("g", _generators()[:4], ids=["path", "cycle", "tree", "community"])
def test_normalized_laplacian(g):
    if np.any(g.degrees == 0):
        pytest.skip("isolated node")
    L = build_laplacian(g, "normalized")
    np.testing.assert_array_equal(L.operator.diagonal(), 1.0)
    assert (L.operator != L.operator.T).nnz == 0
    assert np.linalg.eigvalsh(L.toarray()).min() >= -1e-10


def test_normalized_rejects_isolated_node():
    g = Graph(3, sp.csr_matrix(np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0]], dtype=float)))
    with pytest.raises(DegreeZeroError):
        build_laplacian(g, "normalized")


def test_path_examples():
    g = gen_path(1000)
    assert g.num_edges == 999
    assert g.degrees[0] == 1 and g.degrees[999] == 1
    g2 = gen_path(2)
    assert g2.num_edges == 1 and g2.weights[0, 1] == 1.0
    np.testing.assert_array_equal(gen_path(3).degrees, [1, 2, 1])
    with pytest.raises(ValueError):
        gen_path(1)


def test_cycle_examples():
    g = gen_cycle(8)
    assert g.num_edges == 8
    np.testing.assert_array_equal(g.degrees, 2)
    with pytest.raises(ValueError):
        gen_cycle(2)


@pytest.mark.parametrize("depth,n", [(0, 1), (2, 7), (9, 1023)])
def test_binary_tree_sizes(depth, n):
    assert gen_binary_tree(depth).n == n


def test_binary_tree_degrees():
    g = gen_binary_tree(2)
    deg = g.degrees
    assert deg[0] == 2
    np.testing.assert_array_equal(deg[1:3], 3)
    np.testing.assert_array_equal(deg[3:], 1)
    assert gen_binary_tree(0).num_edges == 0


def test_community_components_match_null_space():
    g = gen_community([100] * 10, p_in=0.8, p_out=0.0, seed=0)
    ncomp, _ = connected_components(g)
    assert ncomp == 10
    lam = np.linalg.eigvalsh(build_laplacian(g).toarray())
    assert np.sum(lam < 1e-9) == ncomp


def test_community_c5_sizes():
    sizes = community_sizes(5)
    assert sizes[0] == 13 and sizes[-1] == 115 and sizes[1:9] == [109] * 8
    assert gen_community(sizes, seed=0).n == 1000


@pytest.mark.parametrize("t", [1, 2, 3, 4, 5])
def test_community_types_total(t):
    assert sum(community_sizes(t)) == 1000


def test_community_complete_graph():
    g = gen_community([5], p_in=1.0, p_out=0.0, seed=0)
    np.testing.assert_array_equal(g.weights.toarray(), np.ones((5, 5)) - np.eye(5))


def test_community_seeded_and_validated():
    a = gen_community([30, 30], 0.3, 0.05, seed=7)
    b = gen_community([30, 30], 0.3, 0.05, seed=7)
    assert a == b
    with pytest.raises(ValueError):
        gen_community([], 0.5, 0.1)
    with pytest.raises(ValueError):
        gen_community([10], 0.1, 0.5)


def test_knn_identical_features_weight_one():
    X = np.array([[0.0, 0.0], [0.0, 0.0], [3.0, 1.0], [5.0, 2.0], [9.0, 9.0]])
    g = knn_graph(X, 2)
    assert g.weights[0, 1] == 1.0


def test_knn_min_degree_500():
    X = np.random.default_rng(1).normal(size=(500, 4))
    g = knn_graph(X, 20)
    assert np.diff(g.weights.indptr).min() >= 20


def test_knn_collinear_symmetrization():
    X = np.array([[0.0], [1.0], [2.0]])
    g = knn_graph(X, 1)
    # the ends each pick the middle; the middle ends up with both
    assert np.diff(g.weights.indptr)[1] == 2


def test_knn_weights_and_sigma():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(60, 2))
    g = knn_graph(X, 4)
    from scipy.spatial import cKDTree

    d, j = cKDTree(X).query(X, k=5)
    sigma = np.std(d[:, 1:])
    i, jj = 0, j[0, 1]
    assert g.weights[i, jj] == pytest.approx(np.exp(-d[0, 1] ** 2 / (2 * sigma**2)), rel=1e-12)


def test_knn_rejects_small_n():
    with pytest.raises(ValueError):
        knn_graph(np.zeros((5, 2)), 5)


def test_save_load_roundtrip(tmp_path):
    for g in _generators():
        path = tmp_path / "g.mtx"
        save_graph(g, path)
        h = load_graph(path)
        assert h == g
        assert h.weights.nnz == g.weights.nnz


@given(st.lists(st.floats(1e-300, 1e300, allow_nan=False), min_size=3, max_size=3))
@settings(max_examples=30, deadline=None)
def test_roundtrip_exact_floats(tmp_path_factory, w):
    W = sp.csr_matrix(
        (w + w, ([0, 1, 2, 1, 2, 0], [1, 2, 0, 0, 1, 2])),
        shape=(3, 3),
    )
    g = Graph(3, W)
    path = tmp_path_factory.mktemp("rt") / "g.mtx"
    save_graph(g, path)
    assert load_graph(path) == g


def test_load_one_based(tmp_path):
    p = tmp_path / "a.mtx"
    p.write_text("%%MatrixMarket matrix coordinate real symmetric\n3 3 1\n2 1 0.5\n")
    g = load_graph(p)
    assert g.weights[1, 0] == 0.5 and g.weights[0, 1] == 0.5 and g.num_edges == 1


def test_load_general_disagreeing(tmp_path):
    p = tmp_path / "a.mtx"
    p.write_text("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 2 1.0\n2 1 2.0\n")
    with pytest.raises(GraphFormatError):
        load_graph(p)


def test_load_general_symmetric_ok(tmp_path):
    p = tmp_path / "a.mtx"
    p.write_text("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 2 1.5\n2 1 1.5\n")
    assert load_graph(p).weights[0, 1] == 1.5


@pytest.mark.parametrize(
    "text",
    [
        "not a header\n2 2 1\n1 2 1.0\n",
        "%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n",
        "%%MatrixMarket matrix coordinate real symmetric\n2 3 1\n1 2 1.0\n",
    ],
)
def test_load_malformed(tmp_path, text):
    p = tmp_path / "bad.mtx"
    p.write_text(text)
    with pytest.raises(GraphFormatError):
        load_graph(p)


def test_graph_validation():
    with pytest.raises(ValueError):
        Graph(2, sp.csr_matrix(np.array([[0.0, 1.0], [2.0, 0.0]])))
    with pytest.raises(ValueError):
        Graph(2, sp.csr_matrix(np.array([[0.0, -1.0], [-1.0, 0.0]])))
    with pytest.raises(ValueError):
        Graph(2, sp.csr_matrix(np.array([[1.0, 1.0], [1.0, 0.0]])))


def test_load_features_with_header(tmp_path):
    p = tmp_path / "f.csv"
    p.write_text("a,b\n1,2\n3,4\n")
    np.testing.assert_array_equal(load_features(p), [[1, 2], [3, 4]])
