"""Sparse graph representation and normalized-propagation linear algebra.

Graphs are undirected and simple: edges are stored canonically as (i, j)
with i < j, and the CSR adjacency covers the symmetric closure with unit
values. Self-loops are never stored; degree normalization adds them
implicitly where needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DataError


@dataclass(frozen=True)
class CsrMatrix:
    """Square-or-rectangular sparse matrix in compressed sparse row form."""

    shape: tuple[int, int]
    row_ptr: np.ndarray  # int64, length rows + 1
    col_idx: np.ndarray  # int64, sorted within each row
    values: np.ndarray  # float64

    @property
    def nnz(self) -> int:
        return int(self.col_idx.shape[0])

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.shape, dtype=np.float64)
        for i in range(self.shape[0]):
            lo, hi = self.row_ptr[i], self.row_ptr[i + 1]
            dense[i, self.col_idx[lo:hi]] = self.values[lo:hi]
        return dense


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph with canonical edge list and CSR adjacency."""

    num_nodes: int
    edges: np.ndarray  # (M, 2) int64, i < j, lexicographically sorted
    csr: CsrMatrix  # symmetric binary adjacency, zero diagonal

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    def neighbors(self, node: int) -> np.ndarray:
        lo, hi = self.csr.row_ptr[node], self.csr.row_ptr[node + 1]
        return self.csr.col_idx[lo:hi]

    def degrees(self) -> np.ndarray:
        return np.diff(self.csr.row_ptr)


def _csr_from_sym_entries(num_nodes: int, rows, cols, vals) -> CsrMatrix:
    """CSR over already-symmetric (row, col, value) entries."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=np.float64)
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    row_ptr = np.zeros(num_nodes + 1, dtype=np.int64)
    np.add.at(row_ptr, rows + 1, 1)
    np.cumsum(row_ptr, out=row_ptr)
    return CsrMatrix((num_nodes, num_nodes), row_ptr, cols, vals)


def build_graph(edge_list, num_nodes: int) -> Graph:
    """Canonicalize an edge list into a Graph.

    Accepts either orientation of each undirected edge and drops duplicates.
    Rejects self-loops and out-of-range indices.
    """
    if num_nodes < 1:
        raise DataError(f"num_nodes must be positive, got {num_nodes}")
    edges = np.asarray(edge_list, dtype=np.int64).reshape(-1, 2)
    if edges.shape[0] > 0:
        if edges.min() < 0 or edges.max() >= num_nodes:
            bad = edges[(edges < 0).any(axis=1) | (edges >= num_nodes).any(axis=1)][0]
            raise DataError(
                f"edge ({bad[0]}, {bad[1]}) out of range for {num_nodes} nodes"
            )
        loops = edges[:, 0] == edges[:, 1]
        if loops.any():
            node = edges[loops][0, 0]
            raise DataError(f"self-loop on node {node} is not allowed")
        lo = np.minimum(edges[:, 0], edges[:, 1])
        hi = np.maximum(edges[:, 0], edges[:, 1])
        edges = np.unique(np.stack([lo, hi], axis=1), axis=0)
    return _graph_from_canonical_edges(num_nodes, edges)


def _graph_from_canonical_edges(num_nodes: int, edges: np.ndarray) -> Graph:
    """Build a Graph from deduplicated (i, j), i < j edges (trusted input)."""
    edges = edges.reshape(-1, 2)
    both_rows = np.concatenate([edges[:, 0], edges[:, 1]])
    both_cols = np.concatenate([edges[:, 1], edges[:, 0]])
    csr = _csr_from_sym_entries(
        num_nodes, both_rows, both_cols, np.ones(both_rows.shape[0])
    )
    return Graph(num_nodes, edges, csr)


def normalized_adjacency(graph: Graph) -> CsrMatrix:
    """Symmetric degree-normalized adjacency with an implicit self-loop.

    Entry (i, j) is 1 / sqrt(d_i * d_j) where d counts the node's neighbors
    plus one for the self-loop; the diagonal entry of node i is 1 / d_i.
    """
    n = graph.num_nodes
    deg = graph.degrees().astype(np.float64) + 1.0
    inv_sqrt = 1.0 / np.sqrt(deg)
    e = graph.edges
    diag = np.arange(n, dtype=np.int64)
    rows = np.concatenate([e[:, 0], e[:, 1], diag])
    cols = np.concatenate([e[:, 1], e[:, 0], diag])
    vals = np.concatenate(
        [
            inv_sqrt[e[:, 0]] * inv_sqrt[e[:, 1]],
            inv_sqrt[e[:, 1]] * inv_sqrt[e[:, 0]],
            1.0 / deg,
        ]
    )
    return _csr_from_sym_entries(n, rows, cols, vals)


def spmm(s: CsrMatrix, x: np.ndarray) -> np.ndarray:
    """Sparse @ dense product."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or s.shape[1] != x.shape[0]:
        raise DataError(f"cannot multiply {s.shape} CSR by dense {x.shape}")
    return kernels.csr_dense_matmul(s.row_ptr, s.col_idx, s.values, x)


def propagate_k(s: CsrMatrix, x: np.ndarray, k: int) -> np.ndarray:
    """Apply ``spmm`` k times; the k-th matrix power is never materialized."""
    if k < 1:
        raise DataError(f"propagation order must be >= 1, got {k}")
    out = x
    for _ in range(k):
        out = spmm(s, out)
    return out


def read_edge_list(path) -> list[tuple[int, int]]:
    """Parse a whitespace-separated 'u v' per line edge file (0-indexed)."""
    edges = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            parts = stripped.split()
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected 'u v', got {stripped!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise DataError(
                    f"{path}:{lineno}: non-integer node index in {stripped!r}"
                ) from None
            edges.append((u, v))
    return edges


def write_edge_list(path, graph: Graph) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, j in graph.edges:
            fh.write(f"{i} {j}\n")
