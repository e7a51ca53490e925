"""Synthetic stochastic block model datasets."""
import logging
from pathlib import Path

import numpy as np

from .defaults import rng
from .formats import write_features, write_labels
from .graph import SparseGraph, largest_component, write_edgelist

logger = logging.getLogger(__name__)


def sbm(
    sizes=(60, 60, 60, 60, 60),
    p_in: float = 0.2,
    p_out: float = 0.01,
    n_features: int = 16,
    signal: float = 1.0,
    seed: int = 0,
):
    """Stochastic block model graph with class-dependent Gaussian features.

    Nodes of block ``c`` link with probability ``p_in`` inside the block and
    ``p_out`` across blocks. Features are a per-block mean, scaled by
    ``signal``, plus standard normal noise. Only the largest component is
    kept and renumbered from 0.

    Returns:
        tuple: ``(graph, features, labels)``.
    """
    if not (0 <= p_out <= 1 and 0 <= p_in <= 1):
        raise ValueError("Edge probabilities must lie in [0, 1]")
    generator = rng(seed, "dataset")
    labels = np.repeat(np.arange(len(sizes)), sizes)
    n = len(labels)
    probability = np.where(labels[:, None] == labels[None, :], p_in, p_out)
    draws = np.triu(generator.random((n, n)) < probability, k=1)
    u, v = np.nonzero(draws)

    means = signal * generator.standard_normal((len(sizes), n_features))
    X = means[labels] + generator.standard_normal((n, n_features))

    g, remap = largest_component(SparseGraph.from_edges(n, u, v, attrs={"generator": "sbm", "seed": seed}))
    keep = np.array(sorted(remap, key=remap.get), dtype=np.int64)
    logger.info("Generated SBM with %d of %d nodes in the largest component", len(keep), n)
    return SparseGraph(g.adjacency, attrs=g.attrs), X[keep], labels[keep]


def write_dataset(out_dir, g: SparseGraph, X, labels) -> dict:
    """Write ``graph.tsv``, ``features.csv`` and ``labels.txt`` into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "graph": out_dir / "graph.tsv",
        "features": out_dir / "features.csv",
        "labels": out_dir / "labels.txt",
    }
    write_edgelist(g, paths["graph"])
    write_features(paths["features"], X)
    write_labels(paths["labels"], labels)
    return paths
