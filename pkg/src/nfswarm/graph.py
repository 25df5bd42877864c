"""Proximity graphs and spectral connectivity measures.

Edges are stored as index pairs. In undirected mode a pair is normalised to
``(min, max)``. In directed mode the pair ``(i, j)`` means *node i senses
node j*, so information travels from ``j`` to ``i``.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

CONNECTIVITY_THRESHOLD = 1e-8
JACOBI_TOL = 1e-10
JACOBI_MAX_SWEEPS = 100


class GraphError(ValueError):
    """Invalid input to a graph routine."""


@dataclass(frozen=True)
class ProximityGraph:
    node_count: int
    edges: frozenset
    radius: float = math.inf
    directed: bool = False

    def __post_init__(self):
        if self.node_count < 1:
            raise GraphError("node_count must be positive")
        for i, j in self.edges:
            if i == j:
                raise GraphError(f"self-loop at node {i}")
            if not (0 <= i < self.node_count and 0 <= j < self.node_count):
                raise GraphError(f"edge ({i}, {j}) out of range")
            if not self.directed and i > j:
                raise GraphError("undirected edges must be stored as (min, max)")

    @classmethod
    def from_edges(cls, node_count: int, edges: Iterable, directed=False, radius=math.inf):
        if directed:
            es = frozenset((int(i), int(j)) for i, j in edges)
        else:
            es = frozenset((min(int(i), int(j)), max(int(i), int(j))) for i, j in edges)
        return cls(node_count, es, radius, directed)

    def neighbors(self, i: int) -> list[int]:
        """Nodes adjacent to ``i`` (sensed by ``i`` in directed mode)."""
        if self.directed:
            return sorted(j for a, j in self.edges if a == i)
        out = [b if a == i else a for a, b in self.edges if i in (a, b)]
        return sorted(out)

    def undirected(self) -> "ProximityGraph":
        if not self.directed:
            return self
        return ProximityGraph.from_edges(self.node_count, self.edges, False, self.radius)


@dataclass(frozen=True)
class SpectralReport:
    eigenvalues: tuple
    fiedler: float
    connected: bool
    bfs_connected: bool = field(default=True)


def _as_points(positions) -> np.ndarray:
    pts = np.asarray(positions, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) == 0:
        raise GraphError("positions must be a nonempty sequence of 2D points")
    if not np.all(np.isfinite(pts)):
        raise GraphError("positions contain non-finite coordinates")
    return pts


def build_proximity_graph(positions, radius: float, directed: bool = False) -> ProximityGraph:
    """Connect every pair of distinct nodes at distance ``<= radius``.

    Directed mode emits both arcs for each such pair since all agents sense
    at the same radius.
    """
    if not radius > 0:
        raise GraphError("radius must be positive")
    pts = _as_points(positions)
    n = len(pts)
    edges = set()
    for i in range(n):
        for j in range(i + 1, n):
            if math.hypot(*(pts[i] - pts[j])) <= radius:
                if directed:
                    edges.add((i, j))
                    edges.add((j, i))
                else:
                    edges.add((i, j))
    return ProximityGraph(n, frozenset(edges), float(radius), directed)


def adjacency(graph: ProximityGraph) -> np.ndarray:
    a = np.zeros((graph.node_count, graph.node_count))
    for i, j in graph.edges:
        a[i, j] = 1.0
        if not graph.directed:
            a[j, i] = 1.0
    return a


def laplacian(graph: ProximityGraph) -> np.ndarray:
    """Combinatorial Laplacian ``D - A`` of an undirected graph."""
    if graph.directed:
        raise GraphError("laplacian is defined here for undirected graphs only")
    a = adjacency(graph)
    return np.diag(a.sum(axis=1)) - a


def jacobi_eigen(matrix, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS):
    """Cyclic Jacobi eigen-decomposition of a real symmetric matrix.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues ascending and
    eigenvectors as matching columns. Sweeps stop once the Frobenius norm of
    the off-diagonal part drops below ``tol``.
    """
    a = np.array(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise GraphError("matrix must be square")
    if not np.all(np.isfinite(a)):
        raise GraphError("matrix contains non-finite entries")
    if np.max(np.abs(a - a.T), initial=0.0) > 1e-12:
        raise GraphError("matrix is not symmetric")
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    v = np.eye(n)
    for _ in range(max_sweeps):
        off = math.sqrt(max(float(np.sum(a * a) - np.sum(np.diag(a) ** 2)), 0.0))
        if off < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                h = a[q, q] - a[p, p]
                if abs(apq) < abs(h) * 1e-36:
                    t = apq / h
                else:
                    theta = h / (2.0 * apq)
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                # A <- J^T A J with J the (p, q) plane rotation
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def symmetric_eigenvalues(matrix) -> list[float]:
    w, _ = jacobi_eigen(matrix)
    return [float(x) for x in w]


def bfs_reachable(node_count: int, adjacency_lists: dict, root: int) -> set:
    seen = {root}
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for w in adjacency_lists.get(u, ()):
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return seen


def is_connected(graph: ProximityGraph) -> bool:
    g = graph.undirected()
    adj: dict = {}
    for i, j in g.edges:
        adj.setdefault(i, []).append(j)
        adj.setdefault(j, []).append(i)
    return len(bfs_reachable(g.node_count, adj, 0)) == g.node_count


def fiedler_value(graph: ProximityGraph) -> SpectralReport:
    """Second-smallest Laplacian eigenvalue with a BFS cross-check.

    ``connected`` follows BFS reachability, which is authoritative when the
    spectral test sits within floating-point noise of the threshold.
    """
    if graph.node_count < 2:
        raise GraphError("Fiedler value needs at least 2 nodes")
    w = symmetric_eigenvalues(laplacian(graph))
    lam2 = max(w[1], 0.0)
    bfs = is_connected(graph)
    return SpectralReport(tuple(w), lam2, bfs, bfs)


def has_directed_spanning_tree(graph: ProximityGraph, root: int) -> bool:
    """True if every node receives information from ``root``.

    A stored arc ``(i, j)`` means i senses j, so information flows j -> i and
    the search walks arcs in reverse.
    """
    if not 0 <= root < graph.node_count:
        raise GraphError(f"root {root} out of range")
    flow: dict = {}
    for i, j in graph.edges:
        flow.setdefault(j, []).append(i)
        if not graph.directed:
            flow.setdefault(i, []).append(j)
    return len(bfs_reachable(graph.node_count, flow, root)) == graph.node_count


def restrict(graph: ProximityGraph, pairs: Sequence) -> ProximityGraph:
    """Subgraph keeping only edges listed in ``pairs`` (orientation ignored)."""
    keep = {(min(i, j), max(i, j)) for i, j in pairs}
    es = [e for e in graph.edges if (min(e), max(e)) in keep]
    return ProximityGraph.from_edges(graph.node_count, es, graph.directed, graph.radius)
