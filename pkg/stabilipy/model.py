"""Surrogate graph model, output ingestion, perturbations and the
clean-versus-perturbed evaluation loop."""
import logging
import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd
import scipy.sparse as sp
from scipy.sparse import csgraph
from scipy.special import rel_entr, softmax
from sklearn.linear_model import LogisticRegression

from .defaults import resolve_config, rng
from .exceptions import (
    BadDimensions,
    DimensionMismatch,
    InfeasibleBudget,
    NegativeEntry,
    NotADistribution,
    StabilipyWarning,
)
from .formats import is_sgmx, read_features, read_matrix
from .graph import SparseGraph
from .pipeline import run_pipeline

logger = logging.getLogger(__name__)

PROBABILITY_FLOOR = 1e-9
PERTURBATIONS = ("gaussian", "dice")


@dataclass(frozen=True)
class ModelOutputs:
    """Post-softmax outputs, one probability row per node."""

    Y: np.ndarray

    @classmethod
    def from_array(cls, Y) -> "ModelOutputs":
        """Clamp entries to at least 1e-9 and renormalize every row."""
        Y = np.maximum(np.asarray(Y, dtype=float), PROBABILITY_FLOOR)
        return cls(Y=Y / Y.sum(axis=1, keepdims=True))

    @property
    def n(self) -> int:
        return self.Y.shape[0]


def _as_outputs(Y) -> ModelOutputs:
    return Y if isinstance(Y, ModelOutputs) else ModelOutputs.from_array(Y)


def normalized_adjacency(g: SparseGraph) -> sp.csr_matrix:
    """``D^-1/2 (A + I) D^-1/2`` with ``D`` the degree of ``A + I``."""
    A = g.adjacency + sp.identity(g.n_nodes, format="csr")
    scale = sp.diags(1.0 / np.sqrt(np.asarray(A.sum(axis=1)).ravel()))
    return (scale @ A @ scale).tocsr()


def random_weights(n_features: int, hidden: int, n_classes: int, seed: int = 0, scale: float = 1.0):
    """Gaussian weights of the two-layer surrogate, drawn from the model stream."""
    generator = rng(seed, "model")
    W1 = generator.normal(0.0, scale / np.sqrt(max(n_features, 1)), (n_features, hidden))
    W2 = generator.normal(0.0, scale / np.sqrt(hidden), (hidden, n_classes))
    return W1, W2


def fit_weights(g: SparseGraph, X, labels, hidden: int, seed: int = 0, n_classes: int = None, C: float = 1.0):
    """Surrogate weights whose readout is fitted to the node labels.

    ``W1`` is drawn as in :func:`random_weights`; ``W2`` is a multinomial
    logistic regression without intercept on the propagated hidden layer
    ``A relu(A X W1)``, so ``surrogate_forward`` returns its class
    probabilities.

    Raises:
        DimensionMismatch: ``labels`` or ``X`` do not match the graph.
        ValueError: Fewer than two classes occur in ``labels``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    labels = np.asarray(labels, dtype=np.int64)
    if X.shape[0] != g.n_nodes or labels.shape != (g.n_nodes,):
        raise DimensionMismatch(f"{X.shape[0]} feature rows and {len(labels)} labels for {g.n_nodes} nodes")
    n_classes = int(labels.max()) + 1 if n_classes is None else n_classes
    present = np.unique(labels)
    if len(present) < 2:
        raise ValueError("Fitting the surrogate readout needs at least two classes")
    W1, _ = random_weights(X.shape[1], hidden, n_classes, seed)
    A = normalized_adjacency(g)
    propagated = A @ np.maximum(A @ (X @ W1), 0.0)
    clf = LogisticRegression(C=C, fit_intercept=False, max_iter=2000).fit(propagated, labels)

    W2 = np.zeros((hidden, n_classes))
    if len(clf.classes_) == 2:
        # one logit column for two classes
        W2[:, clf.classes_[0]] = -clf.coef_[0] / 2.0
        W2[:, clf.classes_[1]] = clf.coef_[0] / 2.0
    else:
        W2[:, clf.classes_] = clf.coef_.T
    logger.debug("Fitted surrogate readout: train accuracy %.3f", clf.score(propagated, labels))
    return W1, W2


def surrogate_weights(g: SparseGraph, X, labels, hidden: int, n_classes: int, seed: int = 0):
    """Fitted weights when labels are known, random weights otherwise."""
    X = np.asarray(X, dtype=float)
    if labels is not None and len(np.unique(labels)) > 1:
        return fit_weights(g, X, labels, hidden, seed, n_classes)
    return random_weights(X.shape[1] if X.ndim > 1 else 1, hidden, n_classes, seed)


def surrogate_forward(g: SparseGraph, X, W1, W2) -> ModelOutputs:
    """Two-layer propagation model ``softmax(A relu(A X W1) W2)``.

    ``A`` is the symmetrically normalized adjacency with self-loops.

    Raises:
        DimensionMismatch: Shapes of ``X``, ``W1`` and ``W2`` do not chain.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    W1, W2 = np.asarray(W1, dtype=float), np.asarray(W2, dtype=float)
    if X.shape[0] != g.n_nodes:
        raise DimensionMismatch(f"Features have {X.shape[0]} rows for a graph of {g.n_nodes} nodes")
    if X.shape[1] != W1.shape[0] or W1.shape[1] != W2.shape[0]:
        raise DimensionMismatch(f"Cannot chain X {X.shape}, W1 {W1.shape} and W2 {W2.shape}")
    A = normalized_adjacency(g)
    hidden = np.maximum(A @ (X @ W1), 0.0)
    return ModelOutputs.from_array(softmax(A @ (hidden @ W2), axis=1))


def load_outputs(path, n_nodes: int = None) -> ModelOutputs:
    """Read model outputs from CSV or SGMX and validate them as distributions.

    Raises:
        BadDimensions: Row count differs from ``n_nodes``.
        NegativeEntry: An entry is negative.
        NotADistribution: A row sum is off by more than 1%.
    """
    Y = read_matrix(path) if is_sgmx(path) else read_features(path)
    if n_nodes is not None and Y.shape[0] != n_nodes:
        raise BadDimensions(f"{path} has {Y.shape[0]} rows, expected {n_nodes}")
    if (Y < 0).any():
        raise NegativeEntry(f"{path} has negative entries")
    sums = Y.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > 0.01)
    if len(bad):
        raise NotADistribution(f"Row {bad[0]} of {path} sums to {sums[bad[0]]:.6g}")
    return ModelOutputs.from_array(Y)


def perturb_gaussian(X, level: float, seed: int = 0) -> np.ndarray:
    """Add ``level`` times standard normal noise to every feature."""
    if level < 0:
        raise ValueError(f"Perturbation level must be non-negative, got {level}")
    X = np.asarray(X, dtype=float)
    return X + level * rng(seed, "perturb").standard_normal(X.shape)


def _n_components(n: int, u, v) -> int:
    adjacency = sp.coo_matrix((np.ones(len(u)), (u, v)), shape=(n, n))
    return csgraph.connected_components(adjacency, directed=False)[0]


def perturb_dice(g: SparseGraph, labels, n_pairs: int, seed: int = 0) -> SparseGraph:
    """Connect ``n_pairs`` cross-label node pairs and disconnect ``n_pairs`` same-label ones.

    Added edges have unit weight. A removal that would split a component is
    skipped and the next candidate tried. Counts are stored in
    ``attrs["dice"]``.

    Raises:
        InfeasibleBudget: Fewer candidate pairs than ``n_pairs``.
    """
    labels = np.asarray(labels, dtype=np.int64)
    n = g.n_nodes
    if labels.shape != (n,):
        raise DimensionMismatch(f"{len(labels)} labels for {n} nodes")
    if n_pairs < 0:
        raise ValueError(f"n_pairs must be non-negative, got {n_pairs}")
    u, v, w = g.edges()
    same = labels[u] == labels[v]
    counts = np.bincount(labels)
    cross_pairs = (n * n - int(np.sum(counts ** 2))) // 2
    if n_pairs > cross_pairs - int((~same).sum()):
        raise InfeasibleBudget(f"Not enough unlinked cross-label pairs for {n_pairs} additions")
    if n_pairs > int(same.sum()):
        raise InfeasibleBudget(f"Only {int(same.sum())} same-label edges for {n_pairs} removals")

    generator = rng(seed, "perturb")
    existing = set(zip(u.tolist(), v.tolist()))
    added = []
    while len(added) < n_pairs:
        p, q = (int(x) for x in generator.integers(0, n, size=2))
        key = (min(p, q), max(p, q))
        if labels[p] == labels[q] or key in existing:
            continue
        existing.add(key)
        added.append(key)

    add_u = np.array([a for a, _ in added], dtype=np.int64)
    add_v = np.array([b for _, b in added], dtype=np.int64)
    all_u, all_v = np.concatenate([u, add_u]), np.concatenate([v, add_v])
    alive = np.ones(len(all_u), dtype=bool)
    baseline = _n_components(n, all_u, all_v)
    removed = skipped = 0
    for e in generator.permutation(np.flatnonzero(same)):
        if removed == n_pairs:
            break
        alive[e] = False
        if _n_components(n, all_u[alive], all_v[alive]) > baseline:
            alive[e] = True
            skipped += 1
        else:
            removed += 1
    if removed < n_pairs:
        warnings.warn(
            f"Only {removed} of {n_pairs} same-label edges could be removed without disconnecting the graph",
            StabilipyWarning,
            stacklevel=2,
        )

    all_w = np.concatenate([w, np.ones(len(add_u))])
    attrs = dict(g.attrs, dice={"requested": n_pairs, "added": len(added), "removed": removed, "skipped": skipped})
    logger.info("DICE: added %d, removed %d, skipped %d", len(added), removed, skipped)
    return SparseGraph.from_edges(n, all_u[alive], all_v[alive], all_w[alive], node_ids=g.node_ids, attrs=attrs)


def eval_pair(Y_clean, Y_pert, nodes=None) -> pd.DataFrame:
    """Cosine similarity, KL divergence ``D(clean || perturbed)`` and label flips per node.

    Args:
        Y_clean, Y_pert (ModelOutputs or array-like): Outputs of equal shape.
        nodes (array-like, optional): Nodes to evaluate. Defaults to all.

    Returns:
        pd.DataFrame: Columns ``cos``, ``kld`` and ``flip``, indexed by node.
    """
    A, B = _as_outputs(Y_clean).Y, _as_outputs(Y_pert).Y
    if A.shape != B.shape:
        raise DimensionMismatch(f"Output shapes differ: {A.shape} and {B.shape}")
    nodes = np.arange(A.shape[0]) if nodes is None else np.asarray(nodes, dtype=np.int64)
    A, B = A[nodes], B[nodes]
    cos = np.sum(A * B, axis=1) / (np.linalg.norm(A, axis=1) * np.linalg.norm(B, axis=1))
    return pd.DataFrame(
        {
            "cos": cos,
            "kld": rel_entr(A, B).sum(axis=1),
            "flip": A.argmax(axis=1) != B.argmax(axis=1),
        },
        index=pd.Index(nodes, name="node"),
    )


def perturb(g: SparseGraph, X, kind: str, level, labels=None, seed: int = 0):
    """Apply one perturbation and return the perturbed ``(graph, features)``."""
    if kind not in PERTURBATIONS:
        raise KeyError(f"Unknown perturbation {kind!r}. Allowed perturbations are {list(PERTURBATIONS)}")
    if kind == "gaussian":
        return g, perturb_gaussian(X, level, seed)
    if labels is None:
        raise ValueError("DICE perturbation needs node labels")
    return perturb_dice(g, labels, int(level), seed), X


def segment_table(report, clean, perturbed_by_level: dict, fractions=None) -> pd.DataFrame:
    """Mean cosine similarity and KL divergence per (segment, level)."""
    segments = report.segments(fractions)
    rows = []
    for level, perturbed in perturbed_by_level.items():
        metrics = eval_pair(clean, perturbed)
        for name, nodes in segments.items():
            subset = metrics.iloc[nodes]
            rows.append(
                {
                    "segment": name,
                    "level": level,
                    "mean_cos": subset["cos"].mean() if len(nodes) else np.nan,
                    "mean_kld": subset["kld"].mean() if len(nodes) else np.nan,
                    "n": len(nodes),
                }
            )
    return pd.DataFrame(rows, columns=["segment", "level", "mean_cos", "mean_kld", "n"])


def separation_experiment(
    g: SparseGraph,
    X,
    labels=None,
    kind: str = "gaussian",
    levels=(0.4, 0.8, 1.2),
    fractions=None,
    config: dict = None,
    weights=None,
    n_classes: int = None,
) -> pd.DataFrame:
    """Compare output changes of stable, mid and unstable nodes under perturbation.

    The surrogate model, with its readout fitted to ``labels`` when given,
    is run on the clean inputs, the pipeline selects the
    segments, and each perturbation level is applied with the same seed.

    Returns:
        pd.DataFrame: Columns ``segment, level, mean_cos, mean_kld, n``;
        ``attrs`` holds the effective configuration.
    """
    config = resolve_config(None, config)
    X = np.asarray(X, dtype=float)
    if n_classes is None:
        n_classes = int(np.max(labels)) + 1 if labels is not None else 2
    if weights is None:
        weights = surrogate_weights(g, X, labels, config["hidden"], n_classes, config["seed"])
    W1, W2 = weights
    clean = surrogate_forward(g, X, W1, W2)
    result = run_pipeline(g, X, clean, config)

    perturbed = {}
    for level in levels:
        g_pert, X_pert = perturb(g, X, kind, level, labels, config["seed"])
        perturbed[level] = surrogate_forward(g_pert, X_pert, W1, W2)
    df = segment_table(result.report, clean, perturbed, fractions)
    df.attrs = dict(config, kind=kind, fractions=list(fractions) if fractions else None)
    return df
