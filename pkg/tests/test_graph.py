import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nfswarm import graph
from nfswarm.graph import GraphError, ProximityGraph


def complete(n):
    return ProximityGraph.from_edges(n, itertools.combinations(range(n), 2))


def path(n):
    return ProximityGraph.from_edges(n, [(k, k + 1) for k in range(n - 1)])


# -- build_proximity_graph ---------------------------------------------------

def test_proximity_example_pairs():
    g = graph.build_proximity_graph([(0, 0), (1, 0), (5, 0)], 2.0)
    assert g.edges == {(0, 1)}


def test_proximity_single_point():
    assert graph.build_proximity_graph([(0, 0)], 1.0).edges == frozenset()


def test_proximity_boundary_inclusive():
    assert graph.build_proximity_graph([(0, 0), (0, 2)], 2.0).edges == {(0, 1)}


def test_proximity_directed_emits_both_arcs():
    g = graph.build_proximity_graph([(0, 0), (1, 0)], 2.0, directed=True)
    assert g.edges == {(0, 1), (1, 0)}


@pytest.mark.parametrize("bad", [[(0, math.nan)], [(math.inf, 0), (0, 0)]])
def test_proximity_rejects_non_finite(bad):
    with pytest.raises(GraphError):
        graph.build_proximity_graph(bad, 1.0)


def test_proximity_rejects_bad_radius():
    with pytest.raises(GraphError):
        graph.build_proximity_graph([(0, 0)], 0.0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), min_size=1, max_size=9),
       st.randoms(use_true_random=False))
def test_proximity_permutation_equivariant(points, rnd):
    perm = list(range(len(points)))
    rnd.shuffle(perm)
    g = graph.build_proximity_graph(points, 2.0)
    h = graph.build_proximity_graph([points[p] for p in perm], 2.0)
    relabeled = {(min(perm[i], perm[j]), max(perm[i], perm[j])) for i, j in h.edges}
    assert relabeled == set(g.edges)


def test_graph_rejects_self_loop():
    with pytest.raises(GraphError):
        ProximityGraph(2, frozenset({(1, 1)}))


# -- laplacian ---------------------------------------------------------------

def test_laplacian_path3():
    assert graph.laplacian(path(3)).tolist() == [[1, -1, 0], [-1, 2, -1], [0, -1, 1]]


def test_laplacian_edgeless():
    assert graph.laplacian(ProximityGraph(2, frozenset())).tolist() == [[0, 0], [0, 0]]


def test_laplacian_k3():
    assert graph.laplacian(complete(3)).tolist() == [[2, -1, -1], [-1, 2, -1], [-1, -1, 2]]


def test_laplacian_rejects_directed():
    g = graph.build_proximity_graph([(0, 0), (1, 0)], 2.0, directed=True)
    with pytest.raises(GraphError):
        graph.laplacian(g)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(-4, 4), st.floats(-4, 4)), min_size=1, max_size=10))
def test_laplacian_rows_sum_to_zero_and_symmetric(points):
    lap = graph.laplacian(graph.build_proximity_graph(points, 2.0))
    assert np.all(lap.sum(axis=1) == 0)
    assert np.array_equal(lap, lap.T)


# -- eigensolver -------------------------------------------------------------

def test_eigen_diagonal():
    assert graph.symmetric_eigenvalues([[2, 0], [0, 3]]) == [2, 3]


def test_eigen_char_poly():
    assert graph.symmetric_eigenvalues([[1, -1], [-1, 1]]) == pytest.approx([0, 2], abs=1e-12)


def test_eigen_identity():
    assert graph.symmetric_eigenvalues(np.eye(3)) == [1, 1, 1]


def test_eigen_rejects_asymmetric():
    with pytest.raises(GraphError):
        graph.symmetric_eigenvalues([[1, 2], [0, 1]])


def roots_2x2(m):
    a, b, d = m[0][0], m[0][1], m[1][1]
    mid = 0.5 * (a + d)
    rad = math.hypot(0.5 * (a - d), b)
    return [mid - rad, mid + rad]


def roots_3x3(m):
    # trigonometric solution of the characteristic cubic, Newton-polished
    a = np.asarray(m, float)
    p1 = a[0, 1] ** 2 + a[0, 2] ** 2 + a[1, 2] ** 2
    q = np.trace(a) / 3
    if p1 == 0:
        return sorted(np.diag(a))
    p2 = (a[0, 0] - q) ** 2 + (a[1, 1] - q) ** 2 + (a[2, 2] - q) ** 2 + 2 * p1
    p = math.sqrt(p2 / 6)
    b = (a - q * np.eye(3)) / p
    r = np.linalg.det(b) / 2
    phi = math.acos(min(1.0, max(-1.0, r))) / 3
    e1 = q + 2 * p * math.cos(phi)
    e3 = q + 2 * p * math.cos(phi + 2 * math.pi / 3)
    roots = [e1, 3 * q - e1 - e3, e3]
    # det(A - x I) = -x^3 + c2 x^2 - c1 x + c0
    c2 = np.trace(a)
    c1 = (a[0, 0] * a[1, 1] + a[0, 0] * a[2, 2] + a[1, 1] * a[2, 2]
          - a[0, 1] ** 2 - a[0, 2] ** 2 - a[1, 2] ** 2)
    c0 = np.linalg.det(a)
    polished = []
    for x in roots:
        for _ in range(3):
            f = -x ** 3 + c2 * x ** 2 - c1 * x + c0
            df = -3 * x ** 2 + 2 * c2 * x - c1
            if df == 0:
                break
            step = f / df
            if abs(step) > 1e-6 * (1 + abs(x)):
                break
            x -= step
        polished.append(x)
    return sorted(polished)


sym_entry = st.floats(-10, 10, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(sym_entry, sym_entry, sym_entry)
def test_eigen_matches_closed_form_2x2(a, b, d):
    m = [[a, b], [b, d]]
    assert graph.symmetric_eigenvalues(m) == pytest.approx(roots_2x2(m), abs=1e-9)


def test_eigen_matches_closed_form_3x3():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        e = rng.uniform(-10, 10, size=6)
        m = [[e[0], e[1], e[2]], [e[1], e[3], e[4]], [e[2], e[4], e[5]]]
        assert graph.symmetric_eigenvalues(m) == pytest.approx(roots_3x3(m), abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 9), st.integers(0, 2 ** 32 - 1))
def test_eigen_residuals(n, seed):
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(n, n))
    m = m + m.T
    w, v = graph.jacobi_eigen(m)
    scale = np.linalg.norm(m)
    for k in range(n):
        assert np.linalg.norm(m @ v[:, k] - w[k] * v[:, k]) <= 1e-8 * scale
    assert list(w) == sorted(w)


# -- Fiedler value -----------------------------------------------------------

def test_fiedler_path3():
    rep = graph.fiedler_value(path(3))
    assert rep.fiedler == pytest.approx(1.0, abs=1e-8)
    assert rep.connected
    assert rep.eigenvalues == pytest.approx((0, 1, 3), abs=1e-8)


def test_fiedler_isolated_pair():
    rep = graph.fiedler_value(ProximityGraph(2, frozenset()))
    assert rep.fiedler == 0.0
    assert not rep.connected


def test_fiedler_k4():
    assert graph.fiedler_value(complete(4)).fiedler == pytest.approx(4.0, abs=1e-8)


@pytest.mark.parametrize("n", range(2, 9))
def test_fiedler_complete_graphs(n):
    assert graph.fiedler_value(complete(n)).fiedler == pytest.approx(n, abs=1e-8)


def test_fiedler_needs_two_nodes():
    with pytest.raises(GraphError):
        graph.fiedler_value(ProximityGraph(1, frozenset()))


def test_fiedler_agrees_with_bfs_on_random_graphs():
    rng = np.random.default_rng(20240601)
    for _ in range(500):
        n = int(rng.integers(2, 13))
        p = rng.uniform(0.05, 0.6)
        edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
        g = ProximityGraph.from_edges(n, edges)
        rep = graph.fiedler_value(g)
        assert rep.fiedler >= -1e-10
        assert (rep.fiedler > graph.CONNECTIVITY_THRESHOLD) == graph.is_connected(g)
        assert rep.connected == graph.is_connected(g)


# -- directed spanning tree ------------------------------------------------

def test_spanning_tree_chain():
    # node 1 senses node 0, node 2 senses node 1: information flows 0 -> 1 -> 2
    g = ProximityGraph.from_edges(3, [(1, 0), (2, 1)], directed=True)
    assert graph.has_directed_spanning_tree(g, 0)


def test_spanning_tree_orientation_matters():
    g = ProximityGraph.from_edges(3, [(1, 0), (2, 1)], directed=True)
    assert not graph.has_directed_spanning_tree(g, 2)


def test_spanning_tree_isolated_node():
    g = ProximityGraph.from_edges(3, [(0, 1)], directed=True)
    assert not graph.has_directed_spanning_tree(g, 0)


def test_spanning_tree_single_node():
    assert graph.has_directed_spanning_tree(ProximityGraph(1, frozenset(), directed=True), 0)


def test_spanning_tree_bad_root():
    with pytest.raises(GraphError):
        graph.has_directed_spanning_tree(ProximityGraph(2, frozenset(), directed=True), 5)


def test_restrict_keeps_listed_pairs():
    g = complete(4)
    assert graph.restrict(g, [(1, 0), (2, 3)]).edges == {(0, 1), (2, 3)}
