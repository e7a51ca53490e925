"""Distance mapping distortion between input and output manifolds and the
node stability scores derived from it."""
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.stats import spearmanr

from .defaults import DEFAULTS, rng
from .eigen import GeneralizedSpectrum, dense_pseudoinverse, generalized_eigenpairs
from .exceptions import IsolatedNode, IsolatedNodeWarning, NodeSetMismatch, ZeroCut
from .formats import dump_json
from .graph import SparseGraph, laplacian
from .manifold import Manifold
from .resistance import exact_resistance, resistance_block

logger = logging.getLogger(__name__)


def _graph(m) -> SparseGraph:
    return m.graph if isinstance(m, Manifold) else m


def _same_nodes(G_X, G_Y):
    gx, gy = _graph(G_X), _graph(G_Y)
    if gx.n_nodes != gy.n_nodes:
        raise NodeSetMismatch(f"Input manifold has {gx.n_nodes} nodes, output manifold has {gy.n_nodes}")
    return gx, gy


@dataclass(frozen=True)
class StabilityScores:
    """Node and edge stability scores with the spectrum they came from.

    ``edge_scores`` follow ``G_X.edges()`` order. Isolated nodes score +inf.
    """

    node_scores: np.ndarray
    edge_scores: np.ndarray
    spectrum: GeneralizedSpectrum

    @property
    def s(self) -> int:
        return self.spectrum.s


def dmd_pair(G_X, G_Y, p: int, q: int, tol: float = None) -> float:
    """Distance mapping distortion ``d_eff_Y(p, q) / d_eff_X(p, q)``.

    Args:
        G_X, G_Y (Manifold or SparseGraph): Input and output manifolds on
            the same node set.
        p, q (int): Distinct nodes.

    Raises:
        NodeSetMismatch: The manifolds differ in size.
    """
    gx, gy = _same_nodes(G_X, G_Y)
    return exact_resistance(gy, p, q, tol) / exact_resistance(gx, p, q, tol)


def eigensubspace(spectrum: GeneralizedSpectrum) -> np.ndarray:
    """Weighted eigensubspace ``V_s`` with column ``i`` equal to ``v_i * sqrt(zeta_i)``."""
    return spectrum.vectors * np.sqrt(spectrum.values)


def edge_stability(V: np.ndarray, p: int, q: int) -> float:
    """Squared distance between rows ``p`` and ``q`` of ``V_s``."""
    n = V.shape[0]
    if not (0 <= p < n and 0 <= q < n):
        raise IndexError(f"Node pair ({p}, {q}) out of range for {n} nodes")
    if p == q:
        raise ValueError(f"Edge stability needs two distinct nodes, got ({p}, {q})")
    diff = V[p] - V[q]
    return float(diff @ diff)


def node_score(V: np.ndarray, G_X, p: int) -> float:
    """Mean edge stability over the neighbors of ``p`` in the input manifold.

    Raises:
        IsolatedNode: ``p`` has no neighbor.
    """
    neighbors = _graph(G_X).neighbors(p)
    if len(neighbors) == 0:
        raise IsolatedNode(f"Node {p} has no neighbors in the input manifold")
    return float(np.mean(np.sum((V[p] - V[neighbors]) ** 2, axis=1)))


def _scores_from_spectrum(gx: SparseGraph, spectrum: GeneralizedSpectrum) -> StabilityScores:
    V = eigensubspace(spectrum)
    u, v, _ = gx.edges()
    n = gx.n_nodes
    edge = np.sum((V[u] - V[v]) ** 2, axis=1)
    sums = np.bincount(u, edge, minlength=n) + np.bincount(v, edge, minlength=n)
    counts = np.bincount(u, minlength=n) + np.bincount(v, minlength=n)
    node = np.full(n, np.inf)
    linked = counts > 0
    node[linked] = sums[linked] / counts[linked]
    if not linked.all():
        warnings.warn(
            f"{int((~linked).sum())} isolated node(s) excluded from the ranking", IsolatedNodeWarning, stacklevel=3
        )
    return StabilityScores(node_scores=node, edge_scores=edge, spectrum=spectrum)


def score_nodes(G_X, G_Y, s: int = None, tol: float = None, seed: int = 0, solve_tol: float = None) -> StabilityScores:
    """Stability score of every node from the top-``s`` generalized eigenpairs.

    ``s`` is capped at ``n - 1``.
    """
    gx, gy = _same_nodes(G_X, G_Y)
    s = DEFAULTS["s"] if s is None else s
    s = min(s, gx.n_nodes - 1)
    spectrum = generalized_eigenpairs(laplacian(gx), laplacian(gy), s, tol=tol, seed=seed, solve_tol=solve_tol)
    logger.info("Scored %d nodes with s=%d, lambda_max=%.6g", gx.n_nodes, s, spectrum.values[0])
    return _scores_from_spectrum(gx, spectrum)


def _selection_size(fraction: float, n: int) -> int:
    return min(math.ceil(round(fraction * n, 9)), n // 2)


@dataclass
class StabilityReport:
    """Nodes ranked by stability score with the selected stable and unstable sets.

    Arrays hold dense node indices; ``node_ids`` maps them to the original
    identifiers when the report is serialized.
    """

    ranking: np.ndarray
    scores: np.ndarray
    stable: np.ndarray
    unstable: np.ndarray
    fraction: float
    lambda_max: float = None
    dmd_max: dict = None
    clusters: np.ndarray = None
    node_ids: np.ndarray = None
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.node_ids is None:
            self.node_ids = np.arange(len(self.scores))

    @property
    def excluded(self) -> np.ndarray:
        return np.flatnonzero(~np.isfinite(self.scores))

    def ranks(self) -> np.ndarray:
        """1-based rank of every node; 0 for excluded nodes."""
        ranks = np.zeros(len(self.scores), dtype=np.int64)
        ranks[self.ranking] = np.arange(1, len(self.ranking) + 1)
        return ranks

    def segments(self, fractions=None) -> dict:
        """Split the ranking into stable, mid and unstable segments.

        Args:
            fractions (tuple, optional): ``(stable, mid, unstable)`` shares,
                e.g. ``(0.2, 0.6, 0.2)``. Defaults to the report fraction
                for both ends and the rest in the middle.

        Returns:
            dict: ``{"stable", "mid", "unstable"}`` to arrays of node indices.
        """
        n = len(self.ranking)
        if fractions is None:
            n_stable = n_unstable = len(self.unstable)
        else:
            low, mid, high = fractions
            if min(fractions) < 0 or abs(low + mid + high - 1.0) > 1e-9:
                raise ValueError(f"Segment fractions must be non-negative and sum to 1, got {fractions}")
            n_stable, n_unstable = _selection_size(low, n), _selection_size(high, n)
        return {
            "stable": self.ranking[::-1][:n_stable],
            "mid": self.ranking[n_unstable : n - n_stable],
            "unstable": self.ranking[:n_unstable],
        }

    def to_frame(self) -> pd.DataFrame:
        """One row per node: id, score, rank and cluster, ordered by rank."""
        ranks = self.ranks()
        order = np.concatenate([self.ranking, self.excluded])
        df = pd.DataFrame(
            {
                "id": self.node_ids[order],
                "score": self.scores[order],
                "rank": ranks[order],
                "cluster": (self.clusters[order] if self.clusters is not None else -1),
            }
        )
        df.attrs = dict(self.config, fraction=self.fraction)
        return df

    def to_dict(self) -> dict:
        ranks = self.ranks()
        nodes = [
            {
                "id": self.node_ids[p],
                "score": self.scores[p],
                "rank": int(ranks[p]) or None,
                "cluster": None if self.clusters is None else int(self.clusters[p]),
            }
            for p in np.concatenate([self.ranking, self.excluded])
        ]
        return {
            "nodes": nodes,
            "stable": self.node_ids[self.stable],
            "unstable": self.node_ids[self.unstable],
            "lambda_max": self.lambda_max,
            "dmd_max": self.dmd_max,
            "fraction": self.fraction,
            "n_excluded": len(self.excluded),
            "config": dict(sorted(self.config.items())),
        }

    def to_json(self, path=None) -> str:
        return dump_json(self.to_dict(), path)

    @classmethod
    def from_dict(cls, data: dict) -> "StabilityReport":
        """Rebuild a report from :meth:`to_dict` output; dense indices follow sorted ids."""
        ids = np.array(sorted(node["id"] for node in data["nodes"]))
        index = {node_id: i for i, node_id in enumerate(ids.tolist())}
        scores = np.full(len(ids), np.inf)
        clusters = np.full(len(ids), -1, dtype=np.int64)
        ranked = []
        for node in data["nodes"]:
            p = index[node["id"]]
            if node["score"] is not None:
                scores[p] = node["score"]
            if node["cluster"] is not None:
                clusters[p] = node["cluster"]
            if node["rank"]:
                ranked.append((node["rank"], p))
        ranking = np.array([p for _, p in sorted(ranked)], dtype=np.int64)
        return cls(
            ranking=ranking,
            scores=scores,
            stable=np.array([index[x] for x in data["stable"]], dtype=np.int64),
            unstable=np.array([index[x] for x in data["unstable"]], dtype=np.int64),
            fraction=data["fraction"],
            lambda_max=data.get("lambda_max"),
            dmd_max=data.get("dmd_max"),
            clusters=clusters,
            node_ids=ids,
            config=data.get("config", {}),
        )


def rank_and_select(scores, fraction: float = None, **metadata) -> StabilityReport:
    """Rank nodes by descending score and select the unstable and stable ends.

    Ties are broken by node id. Each end holds ``ceil(fraction * n)`` nodes,
    capped at ``n // 2`` so the two never overlap; nodes with infinite score
    are left out.

    Args:
        scores (StabilityScores or array-like): Node scores.
        fraction (float, optional): Share of nodes per end, in (0, 0.5].
        **metadata: Extra :class:`StabilityReport` fields.
    """
    fraction = DEFAULTS["fraction"] if fraction is None else fraction
    if not 0 < fraction <= 0.5:
        raise ValueError(f"fraction must lie in (0, 0.5], got {fraction}")
    if isinstance(scores, StabilityScores):
        metadata.setdefault("lambda_max", float(scores.spectrum.values[0]))
        scores = scores.node_scores
    scores = np.asarray(scores, dtype=float)
    ids = np.flatnonzero(np.isfinite(scores))
    ranking = ids[np.lexsort((ids, -scores[ids]))]
    n_sel = _selection_size(fraction, len(ranking))
    return StabilityReport(
        ranking=ranking,
        scores=scores,
        stable=ranking[::-1][:n_sel],
        unstable=ranking[:n_sel],
        fraction=fraction,
        **metadata,
    )


def _cut(g: SparseGraph, mask: np.ndarray) -> float:
    u, v, w = g.edges()
    return float(w[mask[u] != mask[v]].sum())


def cmd(G_X, G_Y, S) -> float:
    """Cut mapping distortion ``cut_Y(S) / cut_X(S)`` of a node subset.

    Raises:
        ValueError: ``S`` is empty or holds every node.
        ZeroCut: No input-manifold edge leaves ``S``.
    """
    gx, gy = _same_nodes(G_X, G_Y)
    n = gx.n_nodes
    S = np.unique(np.asarray(S, dtype=np.int64))
    if len(S) and (S.min() < 0 or S.max() >= n):
        raise IndexError(f"Subset node out of range for {n} nodes")
    if len(S) == 0 or len(S) == n:
        raise ValueError("S must be a nonempty proper subset of the nodes")
    mask = np.zeros(n, dtype=bool)
    mask[S] = True
    cut_x = _cut(gx, mask)
    if cut_x == 0:
        raise ZeroCut("No input-manifold edge crosses the cut")
    return _cut(gy, mask) / cut_x


def lipschitz_bound(spectrum: GeneralizedSpectrum) -> float:
    """Largest generalized eigenvalue, an upper bound on every pairwise DMD."""
    if spectrum.s == 0:
        raise ValueError("Spectrum is empty")
    return float(spectrum.values[0])


def max_dmd(G_X, G_Y, cap: int = None, n_samples: int = None, seed: int = 0) -> dict:
    """Largest pairwise distance mapping distortion.

    Every pair is enumerated up to ``cap`` nodes; above it all pairs among a
    random node subset holding about ``n_samples`` pairs are.

    Returns:
        dict: ``value``, ``pair`` (dense ids), ``mode`` ("exhaustive" or
        "sampled") and ``n_pairs``.
    """
    gx, gy = _same_nodes(G_X, G_Y)
    cap = DEFAULTS["oracle_cap"] if cap is None else cap
    n_samples = DEFAULTS["dmd_samples"] if n_samples is None else n_samples
    n = gx.n_nodes
    if n <= cap:
        nodes, mode = np.arange(n), "exhaustive"
    else:
        size = min(n, math.ceil(math.sqrt(2 * n_samples)) + 1)
        nodes, mode = np.sort(rng(seed, "dmd").choice(n, size=size, replace=False)), "sampled"
    rows, cols = np.triu_indices(len(nodes), k=1)
    ratios = resistance_block(gy, nodes)[rows, cols] / resistance_block(gx, nodes)[rows, cols]
    best = int(np.argmax(ratios))
    logger.info("Max DMD %.6g over %d pairs (%s)", ratios[best], len(ratios), mode)
    return {
        "value": float(ratios[best]),
        "pair": [int(nodes[rows[best]]), int(nodes[cols[best]])],
        "mode": mode,
        "n_pairs": int(len(ratios)),
    }


def dense_lambda_max(G_X, G_Y, cap: int = None) -> float:
    """``lambda_max(L_Y^+ L_X)`` from dense pseudoinverses, for test oracles."""
    gx, gy = _same_nodes(G_X, G_Y)
    product = dense_pseudoinverse(laplacian(gy), cap) @ laplacian(gx).toarray()
    return float(np.max(np.linalg.eigvals(product).real))


def subspace_sensitivity(G_X, G_Y, s_values, tol: float = None, seed: int = 0) -> pd.DataFrame:
    """Spearman correlation of node scores at each ``s`` against the largest ``s``.

    The spectrum is computed once at the largest ``s`` and truncated.
    """
    gx, gy = _same_nodes(G_X, G_Y)
    s_values = sorted({min(int(s), gx.n_nodes - 1) for s in s_values})
    spectrum = generalized_eigenpairs(laplacian(gx), laplacian(gy), s_values[-1], tol=tol, seed=seed)
    reference = _scores_from_spectrum(gx, spectrum).node_scores
    rows = []
    for s in s_values:
        truncated = GeneralizedSpectrum(values=spectrum.values[:s], vectors=spectrum.vectors[:, :s])
        scores = _scores_from_spectrum(gx, truncated).node_scores
        rows.append({"s": s, "spearman": float(spearmanr(scores, reference)[0])})
    df = pd.DataFrame(rows, columns=["s", "spearman"])
    df.attrs = {"reference_s": s_values[-1], "lambda_max": float(spectrum.values[0])}
    return df
