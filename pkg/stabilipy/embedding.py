"""Weighted spectral embedding of a graph and what is computed from it."""
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import pearsonr

from .defaults import DEFAULTS, rng
from .eigen import smallest_eigenpairs
from .exceptions import DimensionMismatch, FormatError
from .graph import SparseGraph, laplacian
from .resistance import exact_resistances

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EmbeddingMatrix:
    """``U`` with column ``i`` equal to ``u_i / sqrt(lambda_i)``."""

    U: np.ndarray
    eigenvalues: np.ndarray

    @property
    def n(self) -> int:
        return self.U.shape[0]

    @property
    def k(self) -> int:
        return self.U.shape[1]


@dataclass(frozen=True)
class EigengapReport:
    eigenvalues: np.ndarray
    ratios: np.ndarray
    suggested_k: int
    heuristic_k: int = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "ratios": [float(x) for x in self.ratios],
            "suggested_k": int(self.suggested_k),
            "heuristic_k": None if self.heuristic_k is None else int(self.heuristic_k),
        }


def spectral_embed(g: SparseGraph, k: int = None, tol: float = None, seed: int = 0) -> EmbeddingMatrix:
    """Weighted spectral embedding ``U_k`` of a connected graph.

    Args:
        g (SparseGraph): Connected graph.
        k (int, optional): Number of eigenpairs. Defaults to ``DEFAULTS["k"]``.
        tol (float, optional): Eigensolver tolerance.
        seed (int, optional): Eigensolver seed.

    Returns:
        EmbeddingMatrix
    """
    k = DEFAULTS["k"] if k is None else k
    pairs = smallest_eigenpairs(laplacian(g), k, tol=tol, seed=seed)
    U = pairs.vectors / np.sqrt(pairs.values)
    logger.info("Embedded %s into %d dimensions", g, k)
    return EmbeddingMatrix(U=U, eigenvalues=pairs.values)


def approx_resistance(U: EmbeddingMatrix, p: int, q: int) -> float:
    """Approximate effective resistance ``|U^T (e_p - e_q)|^2``."""
    if not (0 <= p < U.n and 0 <= q < U.n):
        raise IndexError(f"Node pair ({p}, {q}) out of range for {U.n} nodes")
    if p == q:
        raise ValueError(f"Resistance needs two distinct nodes, got ({p}, {q})")
    diff = U.U[p] - U.U[q]
    return float(diff @ diff)


def approx_resistances(U: EmbeddingMatrix, pairs) -> np.ndarray:
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    diff = U.U[pairs[:, 0]] - U.U[pairs[:, 1]]
    return np.sum(diff ** 2, axis=1)


def sample_pairs(n: int, n_pairs: int, generator: np.random.Generator) -> np.ndarray:
    """Draw distinct unordered node pairs uniformly, without replacement."""
    total = n * (n - 1) // 2
    if n_pairs >= total:
        rows, cols = np.triu_indices(n, k=1)
        return np.column_stack([rows, cols])
    seen = set()
    pairs = []
    while len(pairs) < n_pairs:
        p, q = generator.integers(0, n, size=2)
        key = (min(p, q), max(p, q))
        if p != q and key not in seen:
            seen.add(key)
            pairs.append(key)
    return np.array(pairs, dtype=np.int64)


def resistance_correlation(g: SparseGraph, U: EmbeddingMatrix, n_pairs: int = 100, seed: int = 0) -> float:
    """Pearson correlation between exact and embedding-approximated resistances.

    Pairs are drawn uniformly without replacement from the sampling stream
    of ``seed``.
    """
    if U.n != g.n_nodes:
        raise DimensionMismatch(f"Embedding has {U.n} rows for a graph of {g.n_nodes} nodes")
    pairs = sample_pairs(g.n_nodes, n_pairs, rng(seed, "sampling"))
    exact = exact_resistances(g, pairs)
    approx = approx_resistances(U, pairs)
    cc = pearsonr(exact, approx)[0]
    logger.info("Resistance correlation over %d pairs at k=%d: %.4f", len(pairs), U.k, cc)
    return float(cc)


def eigengap_report(
    g: SparseGraph, k_max: int, n_classes: int = None, tol: float = None, seed: int = 0
) -> EigengapReport:
    """Consecutive-eigenvalue ratios as a proxy for the eigengap.

    The suggested ``k`` is the first argmax of ``lambda_(k+1) / lambda_k``
    over ``k = 1..k_max``, so flat spectra suggest ``k = 1``. The heuristic
    ``k`` is ten times the number of classes when that is known.
    """
    n = g.n_nodes
    if not 1 <= k_max < n:
        raise ValueError(f"k_max must satisfy 1 <= k_max < n = {n}, got {k_max}")
    n_eig = min(k_max + 1, n - 1)
    values = smallest_eigenpairs(laplacian(g), n_eig, tol=tol, seed=seed).values
    ratios = values[1:] / values[:-1]
    suggested = int(np.argmax(ratios)) + 1 if len(ratios) else 1
    heuristic = None if n_classes is None else 10 * int(n_classes)
    return EigengapReport(eigenvalues=values, ratios=ratios, suggested_k=suggested, heuristic_k=heuristic)


def _unit_block(block: np.ndarray) -> np.ndarray:
    """Center columns and scale so the mean squared row norm is one."""
    block = block - block.mean(axis=0)
    norm = np.linalg.norm(block)
    if norm == 0:
        return block
    return block * (np.sqrt(block.shape[0]) / norm)


def augment_features(U: EmbeddingMatrix, X=None) -> np.ndarray:
    """Concatenate ``[U_k, X]`` after scaling each block to unit size.

    Both blocks are column-centered and scaled to Frobenius norm
    ``sqrt(n)``, so neither dominates kNN distances. Constant feature
    columns vanish after centering.

    Raises:
        DimensionMismatch: Row counts differ.
        FormatError: ``X`` contains NaN or infinite values.
    """
    blocks = [_unit_block(U.U)]
    if X is not None:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.shape[0] != U.n:
            raise DimensionMismatch(f"Features have {X.shape[0]} rows, embedding has {U.n}")
        if not np.all(np.isfinite(X)):
            raise FormatError("Feature matrix contains NaN or infinite values")
        if X.shape[1]:
            blocks.append(_unit_block(X))
    return np.hstack(blocks)
