"""Sparse undirected graphs and the linear operators built from them.

Everything downstream (imputation, the GCN, the attacks) consumes graphs
through this module: degree/Laplacian/normalized-adjacency views, the
renormalized convolution operator, and KNN graph construction for the
structure-free attacker.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .validation import DataError, check_feature_matrix

NORMALIZED_ADJACENCY = "normalized_adjacency"
COMBINATORIAL_LAPLACIAN = "combinatorial_laplacian"
OPERATOR_KINDS = (NORMALIZED_ADJACENCY, COMBINATORIAL_LAPLACIAN)

KNN_METRICS = ("euclidean", "cosine")


class SparseGraph:
    """Immutable undirected graph: a node count plus a set of edges.

    Edges are stored canonically as (min, max) pairs with duplicates and
    self-loops rejected; the adjacency view is symmetric with a zero
    diagonal. Instances are safe to share across threads.
    """

    def __init__(self, num_nodes: int, edges=()):
        num_nodes = int(num_nodes)
        if num_nodes < 0:
            raise ValueError(f"num_nodes must be nonnegative, got {num_nodes}")
        pairs = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        if pairs.size:
            if pairs.min() < 0 or pairs.max() >= num_nodes:
                bad = pairs[(pairs < 0).any(axis=1) | (pairs >= num_nodes).any(axis=1)][0]
                raise ValueError(f"edge endpoint out of range: {tuple(bad)} with "
                                 f"num_nodes={num_nodes}")
            if (pairs[:, 0] == pairs[:, 1]).any():
                bad = pairs[pairs[:, 0] == pairs[:, 1]][0]
                raise ValueError(f"self-loops are not stored, got edge {tuple(bad)}")
            pairs = np.sort(pairs, axis=1)
            pairs = np.unique(pairs, axis=0)
        self._num_nodes = num_nodes
        self._edges = pairs
        self._edges.setflags(write=False)
        self._adjacency: sp.csr_matrix | None = None

    @property
    def num_nodes(self) -> int:
        return self._num_nodes

    @property
    def num_edges(self) -> int:
        return len(self._edges)

    @property
    def edges(self) -> np.ndarray:
        """Canonical (num_edges, 2) array of sorted unique node-id pairs."""
        return self._edges

    @property
    def adjacency(self) -> sp.csr_matrix:
        """Symmetric 0/1 CSR adjacency with zero diagonal."""
        if self._adjacency is None:
            n = self._num_nodes
            if self.num_edges:
                u, v = self._edges[:, 0], self._edges[:, 1]
                row = np.concatenate([u, v])
                col = np.concatenate([v, u])
                data = np.ones(len(row), dtype=np.int64)
                adj = sp.csr_matrix((data, (row, col)), shape=(n, n))
            else:
                adj = sp.csr_matrix((n, n), dtype=np.int64)
            self._adjacency = adj
        return self._adjacency

    def degrees(self) -> np.ndarray:
        """Neighbor count per node."""
        return np.asarray(self.adjacency.sum(axis=1)).ravel()

    def subgraph(self, nodes) -> "SparseGraph":
        """Induced subgraph on ``nodes``, relabeled 0..len(nodes)-1 in the given order."""
        nodes = np.asarray(nodes, dtype=np.int64)
        pos = -np.ones(self._num_nodes, dtype=np.int64)
        pos[nodes] = np.arange(len(nodes))
        if self.num_edges:
            keep = (pos[self._edges[:, 0]] >= 0) & (pos[self._edges[:, 1]] >= 0)
            sub_edges = pos[self._edges[keep]]
        else:
            sub_edges = np.empty((0, 2), dtype=np.int64)
        return SparseGraph(len(nodes), sub_edges)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseGraph):
            return NotImplemented
        return (self._num_nodes == other._num_nodes
                and self._edges.shape == other._edges.shape
                and bool((self._edges == other._edges).all()))

    def __repr__(self) -> str:
        return f"SparseGraph(num_nodes={self._num_nodes}, num_edges={self.num_edges})"

    @classmethod
    def from_edge_list_file(cls, path, num_nodes: int) -> "SparseGraph":
        return cls(num_nodes, read_edge_list(path))


def read_edge_list(path) -> np.ndarray:
    """Parse a text edge list: one whitespace-separated "u v" pair per line.

    Ids are 0-based; blank lines and ``#`` comments are skipped; duplicate and
    reversed pairs are deduplicated by SparseGraph construction downstream.
    """
    path = Path(path)
    pairs = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected 'u v', got {line!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: unparseable node id in {line!r}") from exc
            pairs.append((u, v))
    return np.asarray(pairs, dtype=np.int64).reshape(-1, 2)


def write_edge_list(path, graph: SparseGraph) -> None:
    path = Path(path)
    with path.open("w") as fh:
        for u, v in graph.edges:
            fh.write(f"{u} {v}\n")


@dataclass(frozen=True)
class PropagationOperator:
    """A diffusion matrix plus the kind it was built as."""

    matrix: sp.csr_matrix
    kind: str


def degree_matrix(g: SparseGraph) -> sp.csr_matrix:
    """Diagonal matrix of neighbor counts."""
    return sp.diags(g.degrees().astype(float), format="csr", shape=(g.num_nodes, g.num_nodes))


def _inv_sqrt_degrees(deg: np.ndarray) -> np.ndarray:
    # zero-degree nodes get 0, not inf: isolated rows carry no information
    with np.errstate(divide="ignore"):
        d = 1.0 / np.sqrt(deg)
    d[~np.isfinite(d)] = 0.0
    return d


def propagation_operator(g: SparseGraph, kind: str = NORMALIZED_ADJACENCY) -> PropagationOperator:
    """Build the diffusion operator used by feature propagation.

    ``normalized_adjacency`` gives D^{-1/2} A D^{-1/2} (non-expansive, the
    default); ``combinatorial_laplacian`` gives D - A exactly.
    """
    if kind not in OPERATOR_KINDS:
        raise ValueError(f"unknown operator kind {kind!r}, expected one of {OPERATOR_KINDS}")
    adj = g.adjacency.astype(float)
    if kind == COMBINATORIAL_LAPLACIAN:
        mat = (degree_matrix(g) - adj).tocsr()
    else:
        d = _inv_sqrt_degrees(g.degrees().astype(float))
        D = sp.diags(d)
        mat = (D @ adj @ D).tocsr()
    return PropagationOperator(matrix=mat, kind=kind)


def gcn_operator(g: SparseGraph) -> sp.csr_matrix:
    """Renormalized convolution operator D̃^{-1/2} (A + I) D̃^{-1/2}."""
    n = g.num_nodes
    a_tilde = g.adjacency.astype(float) + sp.eye(n, format="csr")
    deg = np.asarray(a_tilde.sum(axis=1)).ravel()
    D = sp.diags(_inv_sqrt_degrees(deg))
    return (D @ a_tilde @ D).tocsr()


def _distance_block(X: np.ndarray, rows: np.ndarray, metric: str) -> np.ndarray:
    if metric == "euclidean":
        sq = np.einsum("ij,ij->i", X, X)
        d2 = sq[rows, None] + sq[None, :] - 2.0 * (X[rows] @ X.T)
        np.maximum(d2, 0.0, out=d2)
        return np.sqrt(d2)
    # cosine distance; zero-norm rows are treated as distance 1 to everything
    norms = np.linalg.norm(X, axis=1)
    norms[norms == 0.0] = 1.0
    Xn = X / norms[:, None]
    return 1.0 - Xn[rows] @ Xn.T


def build_knn_graph(features, k: int, metric: str = "euclidean",
                    block_size: int = 2048) -> SparseGraph:
    """Symmetric KNN graph over feature rows.

    Node i links to its k nearest rows under ``metric``; the directed picks
    are symmetrized with a union. Distance ties are broken by lower node id.
    Distances are computed in row blocks to bound memory.
    """
    X = check_feature_matrix(features, name="knn features")
    n = len(X)
    if not 1 <= k < n:
        raise ValueError(f"k must satisfy 1 <= k < num_rows ({n}), got {k}")
    if metric not in KNN_METRICS:
        raise ValueError(f"unknown metric {metric!r}, expected one of {KNN_METRICS}")

    ids = np.arange(n)
    edges = []
    for start in range(0, n, block_size):
        rows = ids[start:start + block_size]
        dist = _distance_block(X, rows, metric)
        dist[np.arange(len(rows)), rows] = np.inf
        for local, i in enumerate(rows):
            # lexsort: primary key distance, secondary key node id (lower wins ties)
            order = np.lexsort((ids, dist[local]))
            for j in order[:k]:
                edges.append((int(i), int(j)))
    return SparseGraph(n, edges)
