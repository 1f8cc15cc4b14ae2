"""Weighted undirected graphs, generators, Laplacians and Matrix Market I/O.

Node indices are 0-based everywhere in memory; Matrix Market files on disk
are 1-based as the format requires.
"""

from __future__ import annotations

import enum
import io
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.io
import scipy.sparse as sp
from scipy.spatial import cKDTree

__all__ = [
    "Graph",
    "Laplacian",
    "LaplacianKind",
    "DegreeZeroError",
    "GraphFormatError",
    "build_laplacian",
    "gen_path",
    "gen_cycle",
    "gen_binary_tree",
    "gen_community",
    "community_sizes",
    "knn_graph",
    "connected_components",
    "load_graph",
    "save_graph",
    "load_features",
]

SYMMETRY_TOL = 1e-12


class DegreeZeroError(ValueError):
    """Raised when the normalized Laplacian is requested for a graph with an isolated node."""


class GraphFormatError(ValueError):
    """Raised for malformed or inconsistent graph files."""


class LaplacianKind(str, enum.Enum):
    COMBINATORIAL = "combinatorial"
    NORMALIZED = "normalized"


@dataclass(frozen=True)
class Graph:
    """Undirected graph given by a symmetric nonnegative adjacency matrix.

    Parameters
    ----------
    n : int
        Number of nodes.
    weights : scipy.sparse.csr_matrix
        ``n x n`` weight matrix with zero diagonal. Only nonzero entries are stored.
    """

    n: int
    weights: sp.csr_matrix

    def __post_init__(self) -> None:
        W = sp.csr_matrix(self.weights, dtype=float)
        W.eliminate_zeros()
        W.sort_indices()
        if W.shape != (self.n, self.n):
            raise ValueError(f"weights shape {W.shape} does not match n={self.n}")
        if W.nnz:
            if not np.all(np.isfinite(W.data)):
                raise ValueError("edge weights must be finite")
            if W.data.min() < 0:
                raise ValueError("edge weights must be nonnegative")
            if np.any(W.diagonal() != 0):
                raise ValueError("self-loops are not allowed")
            if (W != W.T).nnz:
                raise ValueError("weight matrix must be exactly symmetric")
        object.__setattr__(self, "weights", W)

    @property
    def degrees(self) -> np.ndarray:
        return np.asarray(self.weights.sum(axis=1)).ravel()

    @property
    def num_edges(self) -> int:
        return self.weights.nnz // 2

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self.n == other.n and (self.weights != other.weights).nnz == 0

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class Laplacian:
    """Symmetric positive semi-definite graph Laplacian."""

    kind: LaplacianKind
    operator: sp.csr_matrix

    @property
    def n(self) -> int:
        return self.operator.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.operator.shape

    def __matmul__(self, x):
        return self.operator @ x

    def toarray(self) -> np.ndarray:
        return self.operator.toarray()


def _symmetric_from_edges(n: int, rows, cols, vals) -> sp.csr_matrix:
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=float)
    W = sp.coo_matrix(
        (np.concatenate([vals, vals]), (np.concatenate([rows, cols]), np.concatenate([cols, rows]))),
        shape=(n, n),
    )
    return W.tocsr()


def build_laplacian(g: Graph, kind: LaplacianKind | str = LaplacianKind.COMBINATORIAL) -> Laplacian:
    """Combinatorial ``D - W`` or normalized ``I - D^-1/2 W D^-1/2`` Laplacian."""
    kind = LaplacianKind(kind)
    W = g.weights
    d = g.degrees
    if kind is LaplacianKind.COMBINATORIAL:
        L = sp.diags(d) - W
    else:
        if np.any(d <= 0):
            bad = np.flatnonzero(d <= 0)
            raise DegreeZeroError(f"normalized Laplacian undefined: nodes {bad[:10].tolist()} have zero degree")
        s = sp.diags(1.0 / np.sqrt(d))
        L = sp.identity(g.n, format="csr") - s @ W @ s
        # D^-1/2 W D^-1/2 can lose exact symmetry in the last bit
        L = (L + L.T) * 0.5
        L = sp.csr_matrix(L)
        L.setdiag(1.0)
    L = sp.csr_matrix(L)
    L.sort_indices()
    return Laplacian(kind=kind, operator=L)


def gen_path(n: int) -> Graph:
    if n < 2:
        raise ValueError(f"path graph needs n >= 2, got {n}")
    i = np.arange(n - 1)
    return Graph(n, _symmetric_from_edges(n, i, i + 1, np.ones(n - 1)))


def gen_cycle(n: int) -> Graph:
    if n < 3:
        raise ValueError(f"cycle graph needs n >= 3, got {n}")
    i = np.arange(n)
    return Graph(n, _symmetric_from_edges(n, i, (i + 1) % n, np.ones(n)))


def gen_binary_tree(depth: int) -> Graph:
    """Complete binary tree with ``2**(depth+1) - 1`` nodes; node 0 is the root."""
    if depth < 0:
        raise ValueError(f"depth must be nonnegative, got {depth}")
    if depth > 30:
        raise ValueError(f"depth {depth} would overflow a reasonable node count")
    n = 2 ** (depth + 1) - 1
    child = np.arange(1, n)
    parent = (child - 1) // 2
    return Graph(n, _symmetric_from_edges(n, parent, child, np.ones(n - 1)))


# Community sizes of the five community-graph types used in the experiments.
_COMMUNITY_TYPES = {
    1: [100] * 10,
    2: [50] + [105] * 8 + [110],
    3: [25] + [108] * 8 + [111],
    4: [17] + [109] * 8 + [111],
    5: [13] + [109] * 8 + [115],
}

DEFAULT_P_IN = 0.7
DEFAULT_P_OUT = 0.002


def community_sizes(graph_type: int) -> list[int]:
    """Community sizes of type ``C1`` ... ``C5`` (all have n = 1000)."""
    try:
        return list(_COMMUNITY_TYPES[graph_type])
    except KeyError:
        raise ValueError(f"community graph type must be 1..5, got {graph_type}") from None


def gen_community(
    sizes: Sequence[int],
    p_in: float = DEFAULT_P_IN,
    p_out: float = DEFAULT_P_OUT,
    seed: int = 0,
) -> Graph:
    """Stochastic block model with unit weights.

    Nodes are laid out block by block in the order of ``sizes``. Each pair
    inside a block is joined with probability ``p_in``, each pair across
    blocks with probability ``p_out``.
    """
    sizes = [int(s) for s in sizes]
    if not sizes:
        raise ValueError("sizes must be a non-empty list")
    if any(s <= 0 for s in sizes):
        raise ValueError("community sizes must be positive")
    if not (0.0 <= p_out < p_in <= 1.0):
        raise ValueError(f"need 0 <= p_out < p_in <= 1, got p_in={p_in}, p_out={p_out}")
    n = sum(sizes)
    labels = np.repeat(np.arange(len(sizes)), sizes)
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(labels[iu] == labels[ju], p_in, p_out)
    keep = rng.random(iu.size) < prob
    return Graph(n, _symmetric_from_edges(n, iu[keep], ju[keep], np.ones(int(keep.sum()))))


def knn_graph(features: np.ndarray, k_nn: int) -> Graph:
    """Gaussian-weighted k-nearest-neighbour graph on the rows of ``features``.

    Each node is joined to its ``k_nn`` Euclidean nearest neighbours with weight
    ``exp(-d**2 / (2 sigma**2))`` where sigma is the standard deviation of the
    directed neighbour distances. The result is symmetrized with an elementwise max.
    """
    X = np.asarray(features, dtype=float)
    if X.ndim != 2:
        raise ValueError("features must be a 2-D array (rows = nodes)")
    n = X.shape[0]
    if k_nn < 1:
        raise ValueError("k_nn must be positive")
    if n <= k_nn:
        raise ValueError(f"need more than k_nn={k_nn} nodes, got {n}")
    if not np.all(np.isfinite(X)):
        raise ValueError("features must be finite")

    tree = cKDTree(X)
    # Query one extra neighbour and drop self. With duplicate rows the point
    # itself may not come first, so remove it explicitly.
    dist, idx = tree.query(X, k=k_nn + 1)
    rows = np.empty((n, k_nn), dtype=np.int64)
    dists = np.empty((n, k_nn))
    for i in range(n):
        mask = idx[i] != i
        if mask.all():
            mask[-1] = False
        rows[i] = idx[i][mask][:k_nn]
        dists[i] = dist[i][mask][:k_nn]

    sigma = float(np.std(dists))
    if sigma > 0:
        w = np.exp(-(dists**2) / (2.0 * sigma**2))
    else:
        w = np.ones_like(dists)
    # exp underflow would silently drop edges and break the degree guarantee
    w = np.maximum(w, np.finfo(float).tiny)
    src = np.repeat(np.arange(n), k_nn)
    W = sp.csr_matrix((w.ravel(), (src, rows.ravel())), shape=(n, n))
    W = W.maximum(W.T)
    return Graph(n, W)


def connected_components(g: Graph) -> tuple[int, np.ndarray]:
    """Number of connected components and per-node component label."""
    return sp.csgraph.connected_components(g.weights, directed=False)


def save_graph(g: Graph, path: str | os.PathLike) -> None:
    """Write the adjacency as ``matrix coordinate real symmetric`` (lower triangle, 1-based)."""
    lower = sp.tril(g.weights, k=-1).tocoo()
    order = np.lexsort((lower.row, lower.col))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("%%MatrixMarket matrix coordinate real symmetric\n")
        fh.write(f"{g.n} {g.n} {lower.nnz}\n")
        for r, c, v in zip(lower.row[order], lower.col[order], lower.data[order]):
            fh.write(f"{r + 1} {c + 1} {float(v)!r}\n")


def load_graph(path: str | os.PathLike) -> Graph:
    """Read an adjacency matrix stored in Matrix Market coordinate format.

    ``symmetric`` files store one triangle; ``general`` files must list both
    ``(i, j)`` and ``(j, i)`` with weights agreeing to 1e-12 (relative).
    """
    with open(path, "r", encoding="ascii", errors="replace") as fh:
        header = fh.readline()
        body = fh.read()
    tokens = header.strip().lower().split()
    if len(tokens) != 5 or tokens[0] != "%%matrixmarket" or tokens[1] != "matrix":
        raise GraphFormatError(f"{path}: not a Matrix Market header: {header.strip()!r}")
    if tokens[2] != "coordinate":
        raise GraphFormatError(f"{path}: only coordinate format is supported")
    if tokens[3] not in ("real", "integer", "pattern"):
        raise GraphFormatError(f"{path}: unsupported field {tokens[3]!r}")
    if tokens[4] not in ("symmetric", "general"):
        raise GraphFormatError(f"{path}: unsupported symmetry {tokens[4]!r}")
    try:
        A = scipy.io.mmread(io.StringIO(header + body))
    except Exception as exc:  # scipy raises several exception types on bad input
        raise GraphFormatError(f"{path}: {exc}") from exc
    A = sp.csr_matrix(A, dtype=float)
    if A.shape[0] != A.shape[1]:
        raise GraphFormatError(f"{path}: adjacency must be square, got {A.shape}")
    if A.nnz and np.any(A.diagonal() != 0):
        raise GraphFormatError(f"{path}: diagonal entries (self-loops) are not allowed")
    if A.nnz and A.data.min() < 0:
        raise GraphFormatError(f"{path}: negative weights are not allowed")
    if tokens[4] == "general":
        diff = abs(A - A.T)
        scale = max(abs(A).max(), 1.0) if A.nnz else 1.0
        if diff.nnz and diff.max() > SYMMETRY_TOL * scale:
            raise GraphFormatError(f"{path}: general matrix is not symmetric (max mismatch {diff.max():.3g})")
        A = sp.csr_matrix((A + A.T) * 0.5)
    return Graph(A.shape[0], A)


def load_features(path: str | os.PathLike) -> np.ndarray:
    """Dense feature matrix from CSV, one row per node. Lines starting with ``#`` are skipped."""
    try:
        return np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    except ValueError:
        # tolerate a single non-numeric header row
        return np.loadtxt(path, delimiter=",", comments="#", ndmin=2, skiprows=1)
