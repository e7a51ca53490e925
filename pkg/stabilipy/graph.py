"""Sparse undirected weighted graphs and their Laplacians."""
import logging
import warnings

import numpy as np
import pandas as pd
import scipy.sparse as sp
from scipy.sparse import csgraph

from .exceptions import DimensionMismatch, EmptyGraph, FormatError, InvalidGraph, SelfLoopWarning

logger = logging.getLogger(__name__)


class SparseGraph:
    """Undirected weighted graph stored as a symmetric CSR adjacency matrix.

    Nodes are dense integers ``0..n_nodes-1``. ``node_ids`` maps them back to
    the identifiers of the source file and ``attrs`` carries provenance
    (dropped self-loops, perturbation counts, ...). Instances are treated as
    immutable.
    """

    def __init__(self, adjacency: sp.csr_matrix, node_ids=None, attrs: dict = None):
        adjacency = sp.csr_matrix(adjacency, dtype=float)
        adjacency.sum_duplicates()
        adjacency.sort_indices()
        n = adjacency.shape[0]
        if adjacency.shape != (n, n):
            raise InvalidGraph(f"Adjacency must be square, got shape {adjacency.shape}")
        if adjacency.diagonal().any():
            raise InvalidGraph("Adjacency has self-loops")
        if adjacency.nnz and adjacency.data.min() <= 0:
            raise InvalidGraph("Edge weights must be strictly positive")
        if abs(adjacency - adjacency.T).sum() > 1e-12 * max(1.0, abs(adjacency).sum()):
            raise InvalidGraph("Adjacency is not symmetric")
        self._adjacency = adjacency
        self.node_ids = np.arange(n) if node_ids is None else np.asarray(node_ids)
        if len(self.node_ids) != n:
            raise DimensionMismatch(f"{len(self.node_ids)} node ids for {n} nodes")
        self.attrs = dict(attrs or {})

    @classmethod
    def from_edges(cls, n_nodes: int, u, v, w=None, node_ids=None, attrs: dict = None):
        """Build a graph from parallel endpoint and weight arrays.

        Self-loops are dropped with a warning and parallel edges are merged
        by summing their weights.

        Args:
            n_nodes (int): Number of nodes.
            u, v (array-like): Edge endpoints, dense ids in ``0..n_nodes-1``.
            w (array-like, optional): Positive weights. Defaults to 1.0.
            node_ids (array-like, optional): Original node identifiers.
            attrs (dict, optional): Provenance metadata.

        Raises:
            IndexError: An endpoint is outside ``0..n_nodes-1``.
            InvalidGraph: A weight is not strictly positive.

        Returns:
            SparseGraph
        """
        u = np.asarray(u, dtype=np.int64).ravel()
        v = np.asarray(v, dtype=np.int64).ravel()
        w = np.ones(len(u)) if w is None else np.asarray(w, dtype=float).ravel()
        if not (len(u) == len(v) == len(w)):
            raise DimensionMismatch("Edge arrays u, v and w must have the same length")
        if len(u) and (min(u.min(), v.min()) < 0 or max(u.max(), v.max()) >= n_nodes):
            raise IndexError(f"Edge endpoint out of range for {n_nodes} nodes")
        if len(w) and (not np.all(np.isfinite(w)) or w.min() <= 0):
            raise InvalidGraph("Edge weights must be finite and strictly positive")

        attrs = dict(attrs or {})
        loops = u == v
        n_loops = int(loops.sum())
        if n_loops:
            warnings.warn(f"Dropped {n_loops} self-loop(s)", SelfLoopWarning, stacklevel=2)
            u, v, w = u[~loops], v[~loops], w[~loops]
        attrs["self_loops_dropped"] = attrs.get("self_loops_dropped", 0) + n_loops

        lo, hi = np.minimum(u, v), np.maximum(u, v)
        # coo -> csr sums duplicate (lo, hi) entries
        upper = sp.coo_matrix((w, (lo, hi)), shape=(n_nodes, n_nodes)).tocsr()
        return cls(upper + upper.T, node_ids=node_ids, attrs=attrs)

    @property
    def adjacency(self) -> sp.csr_matrix:
        return self._adjacency

    @property
    def n_nodes(self) -> int:
        return self._adjacency.shape[0]

    @property
    def n_edges(self) -> int:
        return self._adjacency.nnz // 2

    @property
    def degree(self) -> np.ndarray:
        """Weighted degree of every node."""
        return np.asarray(self._adjacency.sum(axis=1)).ravel()

    def edges(self):
        """Return ``(u, v, w)`` arrays of every edge with ``u < v``, sorted by (u, v)."""
        upper = sp.triu(self._adjacency, k=1).tocoo()
        order = np.lexsort((upper.col, upper.row))
        return upper.row[order].astype(np.int64), upper.col[order].astype(np.int64), upper.data[order]

    def neighbors(self, p: int) -> np.ndarray:
        if not 0 <= p < self.n_nodes:
            raise IndexError(f"Node {p} out of range for {self.n_nodes} nodes")
        start, end = self._adjacency.indptr[p], self._adjacency.indptr[p + 1]
        return self._adjacency.indices[start:end]

    def __repr__(self):
        return f"SparseGraph(n_nodes={self.n_nodes}, n_edges={self.n_edges})"


class LaplacianMatrix:
    """Graph Laplacian ``L = D - A`` with its degree vector cached."""

    def __init__(self, matrix: sp.csr_matrix, degree: np.ndarray):
        self.matrix = sp.csr_matrix(matrix)
        self.degree = np.asarray(degree, dtype=float)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def __matmul__(self, x):
        return self.matrix @ x

    def scaled(self, factor: float) -> "LaplacianMatrix":
        return LaplacianMatrix(self.matrix * factor, self.degree * factor)

    def edge_arrays(self):
        """``(u, v, w)`` of the graph behind this Laplacian, with ``u < v``."""
        upper = sp.triu(-self.matrix, k=1).tocoo()
        keep = upper.data != 0
        return upper.row[keep], upper.col[keep], upper.data[keep]

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


def laplacian(g: SparseGraph) -> LaplacianMatrix:
    """Laplacian matrix ``L = D - A`` of ``g``."""
    degree = g.degree
    matrix = sp.diags(degree, format="csr") - g.adjacency
    return LaplacianMatrix(matrix.tocsr(), degree)


def quadratic_form(L: LaplacianMatrix, x) -> float:
    """Return ``x^T L x`` as the weighted sum of squared edge differences."""
    x = np.asarray(x, dtype=float)
    if x.shape != (L.n,):
        raise DimensionMismatch(f"Vector of shape {x.shape} for a Laplacian of size {L.n}")
    u, v, w = L.edge_arrays()
    return float(np.sum(w * (x[u] - x[v]) ** 2))


def smoothness(L: LaplacianMatrix, X) -> float:
    """Return ``Tr(X^T L X)``, the sum of quadratic forms over the columns of X."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != L.n:
        raise DimensionMismatch(f"Matrix with {X.shape[0]} rows for a Laplacian of size {L.n}")
    u, v, w = L.edge_arrays()
    diff = X[u] - X[v]
    return float(np.sum(w[:, None] * diff ** 2))


def connected_components(g: SparseGraph) -> list:
    """Partition the nodes into connected components.

    Returns:
        list: One sorted array of node ids per component, ordered by the
        smallest node id of each component.
    """
    if g.n_nodes == 0:
        return []
    _, labels = csgraph.connected_components(g.adjacency, directed=False)
    components = [np.flatnonzero(labels == c) for c in np.unique(labels)]
    return sorted(components, key=lambda nodes: nodes[0])


def is_connected(g: SparseGraph) -> bool:
    if g.n_nodes == 0:
        return False
    n_components, _ = csgraph.connected_components(g.adjacency, directed=False)
    return n_components == 1


def induced_subgraph(g: SparseGraph, nodes) -> SparseGraph:
    """Subgraph induced by ``nodes``; node ``nodes[i]`` becomes node ``i``."""
    nodes = np.asarray(nodes, dtype=np.int64)
    sub = g.adjacency[nodes][:, nodes]
    return SparseGraph(sub, node_ids=g.node_ids[nodes], attrs=g.attrs)


def largest_component(g: SparseGraph):
    """Largest connected component of ``g``.

    Ties between equally large components go to the one holding the
    smallest node id.

    Raises:
        EmptyGraph: ``g`` has no nodes.

    Returns:
        tuple: ``(subgraph, remap)`` where ``remap`` maps old dense ids to new
        dense ids.
    """
    components = connected_components(g)
    if not components:
        raise EmptyGraph("Graph has no nodes")
    nodes = max(components, key=len)  # max keeps the first of equal sizes
    if len(components) > 1:
        logger.info(
            "Keeping largest of %d components (%d of %d nodes)", len(components), len(nodes), g.n_nodes
        )
    remap = {int(old): new for new, old in enumerate(nodes)}
    return induced_subgraph(g, nodes), remap


def read_edgelist(path) -> SparseGraph:
    """Read a tab-separated ``u<TAB>v[<TAB>w]`` edge list.

    Lines starting with ``#`` are ignored and a missing weight defaults to
    1.0. Node ids may be any non-negative integers; they are remapped to
    dense ids in increasing order and kept in ``node_ids``.

    Raises:
        FormatError: Negative or non-integer ids, or no edges.
    """
    df = pd.read_csv(
        path, sep="\t", comment="#", header=None, names=["u", "v", "w"], dtype={"w": float}
    )
    df = df.dropna(subset=["u", "v"])
    if df.empty:
        raise FormatError(f"No edges found in {path}")
    ends = df[["u", "v"]].apply(pd.to_numeric, errors="coerce").to_numpy(dtype=float)
    if np.isnan(ends).any() or np.any(ends != np.floor(ends)):
        raise FormatError(f"Node ids in {path} must be integers")
    ends = ends.astype(np.int64)
    if ends.min() < 0:
        raise FormatError(f"Node ids in {path} must be non-negative")
    weights = df["w"].fillna(1.0).to_numpy()

    node_ids, dense = np.unique(ends.ravel(), return_inverse=True)
    dense = dense.reshape(ends.shape)
    g = SparseGraph.from_edges(
        len(node_ids), dense[:, 0], dense[:, 1], weights, node_ids=node_ids, attrs={"source": str(path)}
    )
    logger.info("Read %s from %s", g, path)
    return g


def write_edgelist(g: SparseGraph, path) -> None:
    """Write ``g`` as a tab-separated edge list using its original node ids."""
    u, v, w = g.edges()
    df = pd.DataFrame({"u": g.node_ids[u], "v": g.node_ids[v], "w": w})
    df.to_csv(path, sep="\t", header=False, index=False, float_format="%.12g", lineterminator="\n")
