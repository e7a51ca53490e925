"""Graph-based manifolds: kNN graphs, low-resistance-diameter clustering
and resistance-guided sparsification."""
import heapq
import logging
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.cluster.hierarchy import DisjointSet
from scipy.sparse.csgraph import minimum_spanning_tree
from sklearn.neighbors import NearestNeighbors

from .defaults import DEFAULTS
from .embedding import augment_features, spectral_embed
from .exceptions import (
    DimensionMismatch,
    DisconnectedGraph,
    DisconnectedWarning,
    FormatError,
    OracleCapExceeded,
    SamplingRatioWarning,
)
from .formats import dump_json, load_json, sidecar
from .graph import (
    LaplacianMatrix,
    SparseGraph,
    connected_components,
    is_connected,
    largest_component,
    read_edgelist,
    smoothness,
    write_edgelist,
)
from .resistance import NodeWeights, edge_resistances, propagate_node_weights

logger = logging.getLogger(__name__)

DISTANCE_FLOOR = 1e-12
# relative slack when comparing accumulated resistance to the diameter
_DIAMETER_SLACK = 1e-9
# sampling ratios above 1 + RHO_SLACK are reported as inaccurate
RHO_SLACK = 1e-6


@dataclass(frozen=True)
class ManifoldConfig:
    """Parameters of manifold construction.

    ``resistance_diameter`` of None calibrates the diameter so the number of
    clusters reaches ``target_clusters`` (``n // 50`` when that is None too).
    ``reweight`` scales the kept edges of every cluster in :func:`sparsify`.
    """

    knn_k: int = DEFAULTS["knn"]
    resistance_diameter: float = None
    krylov_m: int = DEFAULTS["krylov_m"]
    rho_keep_threshold: float = DEFAULTS["rho_threshold"]
    seed: int = 0
    target_clusters: int = None
    exact_cutoff: int = DEFAULTS["exact_cutoff"]
    bridge_components: bool = True
    n_jobs: int = 1
    reweight: bool = True

    def __post_init__(self):
        if self.knn_k < 2:
            raise ValueError(f"knn_k must be at least 2, got {self.knn_k}")
        if self.resistance_diameter is not None and self.resistance_diameter <= 0:
            raise ValueError(f"resistance_diameter must be positive, got {self.resistance_diameter}")
        if not 0 < self.rho_keep_threshold <= 1:
            raise ValueError(f"rho_keep_threshold must lie in (0, 1], got {self.rho_keep_threshold}")
        if self.target_clusters is not None and self.target_clusters < 1:
            raise ValueError(f"target_clusters must be positive, got {self.target_clusters}")

    @classmethod
    def from_config(cls, config: dict) -> "ManifoldConfig":
        """Build from a resolved config dict (see :func:`stabilipy.defaults.resolve_config`)."""
        return cls(
            knn_k=config["knn"],
            resistance_diameter=config["diameter"],
            krylov_m=config["krylov_m"],
            rho_keep_threshold=config["rho_threshold"],
            seed=config["seed"],
            target_clusters=config["clusters"],
            exact_cutoff=config["exact_cutoff"],
            n_jobs=config["threads"],
        )

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Manifold:
    """A sparsified graph together with its low-resistance clusters.

    ``intra_edges`` and ``inter_edges`` index into ``graph.edges()``; ``rho``
    is aligned with ``graph.edges()`` as well.
    """

    graph: SparseGraph
    clusters: np.ndarray
    intra_edges: np.ndarray
    inter_edges: np.ndarray
    rho: np.ndarray
    provenance: dict = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return self.graph.n_nodes

    @property
    def n_clusters(self) -> int:
        return int(self.clusters.max()) + 1 if len(self.clusters) else 0

    @classmethod
    def from_graph(cls, g: SparseGraph, provenance: dict = None) -> "Manifold":
        """Wrap an unsparsified graph as a single-cluster manifold."""
        n_edges = g.n_edges
        return cls(
            graph=g,
            clusters=np.zeros(g.n_nodes, dtype=np.int64),
            intra_edges=np.arange(n_edges),
            inter_edges=np.zeros(0, dtype=np.int64),
            rho=np.full(n_edges, np.nan),
            provenance=dict(provenance or {}),
        )


def _check_rows(rows) -> np.ndarray:
    rows = np.asarray(rows, dtype=float)
    if rows.ndim == 1:
        rows = rows[:, None]
    if rows.shape[0] < 2:
        raise ValueError(f"A kNN graph needs at least 2 rows, got {rows.shape[0]}")
    if not np.all(np.isfinite(rows)):
        raise FormatError("Rows contain NaN or infinite values")
    return rows


def _bridge(rows: np.ndarray, adjacency: sp.csr_matrix, n_jobs: int) -> sp.csr_matrix:
    """Join components by their closest cross-component pair until connected."""
    while True:
        g = SparseGraph(adjacency)
        components = connected_components(g)
        if len(components) == 1:
            return adjacency
        label = np.empty(g.n_nodes, dtype=np.int64)
        for c, nodes in enumerate(components):
            label[nodes] = c
        bridges = []
        for c, nodes in enumerate(components):
            outside = np.flatnonzero(label != c)
            nn = NearestNeighbors(n_neighbors=1, n_jobs=n_jobs).fit(rows[outside])
            dist, ind = nn.kneighbors(rows[nodes])
            best = int(np.argmin(dist[:, 0]))
            bridges.append((nodes[best], outside[ind[best, 0]], dist[best, 0]))
        u, v, d = (np.array(x) for x in zip(*bridges))
        w = 1.0 / np.maximum(d ** 2, DISTANCE_FLOOR)
        extra = sp.coo_matrix((w, (u, v)), shape=adjacency.shape).tocsr()
        logger.debug("Bridging %d components with %d edges", len(components), len(u))
        adjacency = adjacency.maximum(extra.maximum(extra.T)).tocsr()


def knn_graph(rows, knn_k: int, bridge: bool = False, n_jobs: int = 1, node_ids=None) -> SparseGraph:
    """Symmetric k-nearest-neighbor graph with inverse squared distance weights.

    An edge exists when either endpoint lists the other among its ``knn_k``
    nearest neighbors; its weight is ``1 / max(|x_p - x_q|^2, 1e-12)``.

    Args:
        rows (array-like): ``n x d`` points, ``n >= 2``.
        knn_k (int): Neighbors per point (capped at ``n - 1``).
        bridge (bool, optional): Join disconnected components by their
            closest cross-component pairs instead of keeping the largest
            component. Defaults to False.
        n_jobs (int, optional): Worker count of the neighbor search.
        node_ids (array-like, optional): Identifiers of the rows.

    Returns:
        SparseGraph: Connected kNN graph. Without ``bridge`` it may hold
        fewer nodes than ``rows``; ``node_ids`` tells which.
    """
    rows = _check_rows(rows)
    n = rows.shape[0]
    k = min(int(knn_k), n - 1)
    if k < 1:
        raise ValueError(f"knn_k must be positive, got {knn_k}")

    nn = NearestNeighbors(n_neighbors=k + 1, n_jobs=n_jobs).fit(rows)
    dist, ind = nn.kneighbors(rows)
    # each row drops itself, or its farthest neighbor when duplicates hide it
    drop = ind == np.arange(n)[:, None]
    drop[~drop.any(axis=1), -1] = True
    neighbors = ind[~drop].reshape(n, k)
    distances = dist[~drop].reshape(n, k)

    weights = 1.0 / np.maximum(distances.ravel() ** 2, DISTANCE_FLOOR)
    directed = sp.coo_matrix((weights, (np.repeat(np.arange(n), k), neighbors.ravel())), shape=(n, n)).tocsr()
    adjacency = directed.maximum(directed.T).tocsr()
    node_ids = np.arange(n) if node_ids is None else np.asarray(node_ids)

    g = SparseGraph(adjacency, node_ids=node_ids, attrs={"knn_k": k})
    if is_connected(g):
        return g
    n_components = len(connected_components(g))
    if bridge:
        warnings.warn(f"kNN graph has {n_components} components; bridging them", DisconnectedWarning, stacklevel=2)
        bridged = _bridge(rows, adjacency, n_jobs)
        return SparseGraph(bridged, node_ids=node_ids, attrs={"knn_k": k, "bridged": n_components})
    warnings.warn(
        f"kNN graph has {n_components} components; keeping the largest", DisconnectedWarning, stacklevel=2
    )
    return largest_component(g)[0]


def edge_sampling_ratios(g: SparseGraph, resistances) -> np.ndarray:
    """Edge sampling ratio ``rho = w * d_eff`` of every edge, in ``g.edges()`` order."""
    resistances = np.asarray(resistances, dtype=float)
    _, _, w = g.edges()
    if resistances.shape != w.shape:
        raise DimensionMismatch(f"{len(resistances)} resistances for {len(w)} edges")
    return w * resistances


@dataclass(frozen=True)
class ContractionTree:
    """Merges of a low-resistance contraction, in the order they happen.

    Merge ``i`` joins the supernodes holding ``u[i]`` and ``v[i]`` into one
    of weight ``eta[i] = eta(a) + eta(b) + d_eff(u[i], v[i])``. A merge never
    weighs less than the merges below it, so cutting the tree at a diameter
    keeps a downward-closed set of merges.
    """

    n_nodes: int
    u: np.ndarray
    v: np.ndarray
    eta: np.ndarray

    def n_clusters(self, diameter: float) -> int:
        return self.n_nodes - int(np.count_nonzero(self.eta <= diameter * (1.0 + _DIAMETER_SLACK)))

    def cut(self, diameter: float) -> np.ndarray:
        """Cluster id per node, numbered by smallest member."""
        within = self.eta <= diameter * (1.0 + _DIAMETER_SLACK)
        sets = DisjointSet(range(self.n_nodes))
        for a, b in zip(self.u[within].tolist(), self.v[within].tolist()):
            sets.merge(a, b)
        labels = np.empty(self.n_nodes, dtype=np.int64)
        for c, members in enumerate(sorted(sets.subsets(), key=min)):
            labels[list(members)] = c
        return labels

    def diameter_for(self, target_clusters: int) -> float:
        """Smallest diameter whose cut has at most ``target_clusters`` clusters."""
        heights = np.sort(self.eta)
        needed = self.n_nodes - int(target_clusters)
        if needed <= 0 or len(heights) == 0:
            positive = heights[heights > 0]
            return float(positive[0] / 2.0) if len(positive) else DISTANCE_FLOOR
        return float(max(heights[min(needed, len(heights)) - 1], DISTANCE_FLOOR))


def contraction_tree(g: SparseGraph, resistances) -> ContractionTree:
    """Contract edges until every component is one supernode.

    A priority queue always contracts the edge whose merged weight
    ``eta(p) + eta(q) + d_eff(p, q)`` is smallest; ties go to the lower
    resistance, then the lower endpoint ids. Node weights follow
    :func:`stabilipy.resistance.propagate_node_weights`, keyed by the
    smallest member of each supernode.
    """
    u, v, _ = g.edges()
    resistances = np.asarray(resistances, dtype=float)
    if resistances.shape != u.shape:
        raise DimensionMismatch(f"{len(resistances)} resistances for {len(u)} edges")
    if len(resistances) and resistances.min() < 0:
        raise ValueError("Edge resistances must be non-negative")
    n = g.n_nodes
    sets = DisjointSet(range(n))
    smallest = list(range(n))
    weights = NodeWeights.zeros(n)

    def merged_weight(e):
        a, b = smallest[sets[int(u[e])]], smallest[sets[int(v[e])]]
        return weights.eta[a] + weights.eta[b] + resistances[e]

    heap = [(resistances[e], resistances[e], int(u[e]), int(v[e]), e) for e in range(len(u))]
    heapq.heapify(heap)
    merges = []
    while heap and len(merges) < n - 1:
        key, r, a, b, e = heapq.heappop(heap)
        if sets.connected(a, b):
            continue
        current = merged_weight(e)
        if current > key:
            # weights only grow, so a stale key is a lower bound
            heapq.heappush(heap, (current, r, a, b, e))
            continue
        root_a, root_b = sets[a], sets[b]
        low_a, low_b = smallest[root_a], smallest[root_b]
        weights = propagate_node_weights(weights, low_a, low_b, r)
        sets.merge(a, b)
        smallest[sets[a]] = min(low_a, low_b)
        merges.append((a, b, weights.eta[min(low_a, low_b)]))

    if merges:
        mu, mv, eta = (np.array(x) for x in zip(*merges))
    else:
        mu = mv = np.zeros(0, dtype=np.int64)
        eta = np.zeros(0)
    return ContractionTree(n_nodes=n, u=mu.astype(np.int64), v=mv.astype(np.int64), eta=eta.astype(float))


def default_target_clusters(n_nodes: int, n_classes: int = None) -> int:
    if n_classes:
        return min(10 * int(n_classes), n_nodes)
    return max(1, n_nodes // 50)


def calibrate_diameter(g: SparseGraph, resistances, target_clusters: int) -> float:
    """Resistance diameter whose clustering has at most ``target_clusters`` clusters."""
    resistances = np.asarray(resistances, dtype=float)
    if len(resistances) == 0:
        return 1.0
    diameter = contraction_tree(g, resistances).diameter_for(target_clusters)
    logger.debug("Calibrated resistance diameter %.6g for %d clusters", diameter, target_clusters)
    return diameter


def lrd_decompose(g: SparseGraph, cfg: ManifoldConfig, resistances=None) -> np.ndarray:
    """Low-resistance-diameter clustering by edge contraction.

    Builds the :func:`contraction_tree` and keeps every merge whose
    accumulated weight ``eta(p) + eta(q) + d_eff(p, q)`` stays within the
    resistance diameter. A larger diameter never gives more clusters.

    Args:
        g (SparseGraph): Connected graph.
        cfg (ManifoldConfig): Construction parameters.
        resistances (array-like, optional): Edge resistances in
            ``g.edges()`` order. Estimated when not given.

    Returns:
        np.ndarray: Cluster id per node, numbered by smallest member.
    """
    if not is_connected(g):
        raise DisconnectedGraph("LRD decomposition needs a connected graph")
    if resistances is None:
        resistances = edge_resistances(g, "auto", cfg.krylov_m, cfg.seed, cfg.exact_cutoff)
    tree = contraction_tree(g, resistances)
    diameter = cfg.resistance_diameter
    if diameter is None:
        diameter = tree.diameter_for(cfg.target_clusters or default_target_clusters(g.n_nodes))
    return tree.cut(diameter)


def cluster_backbone(g: SparseGraph, resistances, rho_keep_threshold: float = None, edge_index=None) -> np.ndarray:
    """Edges kept inside one cluster.

    A minimum spanning tree under edge length ``d_eff`` plus every edge with
    ``rho >= rho_keep_threshold``.

    Args:
        g (SparseGraph): Graph holding the cluster.
        resistances (array-like): Edge resistances in ``g.edges()`` order.
        rho_keep_threshold (float, optional): Re-addition threshold.
        edge_index (array-like, optional): Edges of the cluster. Defaults
            to every edge of ``g``.

    Returns:
        np.ndarray: Sorted indices into ``g.edges()``.
    """
    threshold = DEFAULTS["rho_threshold"] if rho_keep_threshold is None else rho_keep_threshold
    resistances = np.asarray(resistances, dtype=float)
    u, v, w = g.edges()
    edge_index = np.arange(len(u)) if edge_index is None else np.asarray(edge_index, dtype=np.int64)
    if len(edge_index) == 0:
        return edge_index

    nodes, local = np.unique(np.concatenate([u[edge_index], v[edge_index]]), return_inverse=True)
    lu, lv = local[: len(edge_index)], local[len(edge_index):]
    lengths = np.maximum(resistances[edge_index], np.finfo(float).tiny)
    tree = minimum_spanning_tree(sp.coo_matrix((lengths, (lu, lv)), shape=(len(nodes), len(nodes))).tocsr())
    tree = tree.tocoo()
    position = {(a, b): e for a, b, e in zip(lu.tolist(), lv.tolist(), edge_index.tolist())}
    kept = {position.get((a, b), position.get((b, a))) for a, b in zip(tree.row.tolist(), tree.col.tolist())}

    rho = w[edge_index] * resistances[edge_index]
    kept.update(edge_index[rho >= threshold].tolist())
    return np.array(sorted(kept), dtype=np.int64)


def _backbone_scale(clusters, u, keep, intra, rho) -> np.ndarray:
    """Per-edge factor that restores each cluster's total sampling ratio on its kept edges."""
    n_clusters = int(clusters.max()) + 1
    owner = clusters[u]
    total = np.bincount(owner[intra], rho[intra], minlength=n_clusters)
    kept = np.bincount(owner[intra & keep], rho[intra & keep], minlength=n_clusters)
    factor = np.ones(n_clusters)
    positive = kept > 0
    factor[positive] = total[positive] / kept[positive]
    return np.where(intra, factor[owner], 1.0)


def sparsify(g_dense: SparseGraph, cfg: ManifoldConfig, resistances=None) -> Manifold:
    """Sparsify a dense kNN graph into a graph-based manifold.

    Estimates edge resistances, clusters the graph, keeps a backbone inside
    every cluster and every inter-cluster edge. With ``cfg.reweight`` the
    kept edges of a cluster are scaled so their sampling ratios add up to
    those of all the cluster's edges, as resistance sampling scales a kept
    edge by its inverse probability.
    """
    if not is_connected(g_dense):
        raise DisconnectedGraph("Sparsification needs a connected graph")
    n = g_dense.n_nodes
    u, v, w = g_dense.edges()
    method = "exact" if n < cfg.exact_cutoff else "krylov"
    if resistances is None:
        resistances = edge_resistances(g_dense, method, cfg.krylov_m, cfg.seed, cfg.exact_cutoff)
    resistances = np.asarray(resistances, dtype=float)
    rho = edge_sampling_ratios(g_dense, resistances)

    tree = contraction_tree(g_dense, resistances)
    diameter = cfg.resistance_diameter
    if diameter is None:
        diameter = tree.diameter_for(cfg.target_clusters or default_target_clusters(n))
    clusters = tree.cut(diameter)

    intra = clusters[u] == clusters[v]
    keep = ~intra
    intra_idx = np.flatnonzero(intra)
    if len(intra_idx):
        owner = clusters[u[intra_idx]]
        order = np.argsort(owner, kind="stable")
        groups = np.split(intra_idx[order], np.flatnonzero(np.diff(owner[order])) + 1)
        for group in groups:
            keep[cluster_backbone(g_dense, resistances, cfg.rho_keep_threshold, group)] = True
    scale = _backbone_scale(clusters, u, keep, intra, rho) if cfg.reweight else np.ones(len(u))

    kept_rho = rho[keep]
    outside = ~((kept_rho > 0) & (kept_rho <= 1.0 + RHO_SLACK))
    if outside.any():
        warnings.warn(
            f"{int(outside.sum())} retained edge(s) have sampling ratios outside (0, 1]; "
            f"the {method} resistances are inaccurate",
            SamplingRatioWarning,
            stacklevel=2,
        )

    H = SparseGraph.from_edges(
        n, u[keep], v[keep], (w * scale)[keep], node_ids=g_dense.node_ids, attrs=g_dense.attrs
    )
    hu, hv, _ = H.edges()
    h_intra = clusters[hu] == clusters[hv]
    provenance = cfg.as_dict()
    provenance.update(
        resistance_diameter_used=float(diameter),
        resistance_method=method,
        n_clusters=int(clusters.max()) + 1,
        dense_edges=int(len(u)),
        retained_edges=int(keep.sum()),
        max_backbone_scale=float(scale.max()) if len(scale) else 1.0,
    )
    logger.info(
        "Sparsified %d -> %d edges over %d clusters", len(u), int(keep.sum()), provenance["n_clusters"]
    )
    return Manifold(
        graph=H,
        clusters=clusters,
        intra_edges=np.flatnonzero(h_intra),
        inter_edges=np.flatnonzero(~h_intra),
        rho=kept_rho,
        provenance=provenance,
    )


def pgm_objective(L: LaplacianMatrix, X, k: int = None, sigma: float = None, cap: int = None) -> float:
    """Log-likelihood ``logdet(T) - Tr(X^T T X) / k`` with ``T = L + I / sigma^2``.

    Raises:
        OracleCapExceeded: ``L`` is larger than ``cap``.
    """
    sigma = DEFAULTS["sigma"] if sigma is None else sigma
    cap = DEFAULTS["oracle_cap"] if cap is None else cap
    if L.n > cap:
        raise OracleCapExceeded(f"logdet of {L.n} nodes exceeds the oracle cap of {cap}")
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    k = max(X.shape[1], 1) if k is None else k
    theta = L.toarray() + np.eye(L.n) / sigma ** 2
    _, logdet = np.linalg.slogdet(theta)
    trace = smoothness(L, X) + np.sum(X ** 2) / sigma ** 2
    return float(logdet - trace / k)


def build_input_manifold(g: SparseGraph, X, cfg: ManifoldConfig, k: int = None, tol: float = None) -> Manifold:
    """Input manifold of a graph with node features.

    Spectral embedding, feature augmentation, kNN graph, sparsification.
    """
    if not is_connected(g):
        raise DisconnectedGraph("The input graph must be connected; take its largest component first")
    k = DEFAULTS["k"] if k is None else k
    U = spectral_embed(g, min(k, g.n_nodes - 1), tol=tol, seed=cfg.seed)
    rows = augment_features(U, X)
    dense = knn_graph(rows, cfg.knn_k, bridge=cfg.bridge_components, n_jobs=cfg.n_jobs, node_ids=g.node_ids)
    manifold = sparsify(dense, cfg)
    manifold.provenance["k"] = U.k
    return manifold


def build_output_manifold(Y, cfg: ManifoldConfig, node_ids=None) -> Manifold:
    """Output manifold over the rows of a model output matrix."""
    dense = knn_graph(Y, cfg.knn_k, bridge=cfg.bridge_components, n_jobs=cfg.n_jobs, node_ids=node_ids)
    return sparsify(dense, cfg)


def save_manifold(m: Manifold, path) -> None:
    """Write the manifold graph as an edge list and the rest to a JSON sidecar."""
    write_edgelist(m.graph, path)
    dump_json(
        {
            "n_nodes": m.n_nodes,
            "node_ids": m.graph.node_ids,
            "clusters": m.clusters,
            "rho": m.rho,
            "inter_edges": m.inter_edges,
            "provenance": dict(sorted(m.provenance.items())),
        },
        sidecar(path),
    )


def load_manifold(path) -> Manifold:
    """Read a manifold written by :func:`save_manifold`.

    Raises:
        FormatError: The sidecar does not match the edge list.
    """
    g = read_edgelist(path)
    meta = load_json(sidecar(path))
    if list(g.node_ids) != meta["node_ids"]:
        raise FormatError(f"Node ids of {path} do not match its sidecar")
    inter = np.asarray(meta["inter_edges"], dtype=np.int64)
    intra = np.setdiff1d(np.arange(g.n_edges), inter)
    rho = np.array([np.nan if x is None else x for x in meta["rho"]], dtype=float)
    return Manifold(
        graph=g,
        clusters=np.asarray(meta["clusters"], dtype=np.int64),
        intra_edges=intra,
        inter_edges=inter,
        rho=rho,
        provenance=meta["provenance"],
    )
