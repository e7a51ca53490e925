"""Effective resistance: Krylov estimates, exact values and the node
weights that accumulate resistance while edges are contracted."""
import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import splu

from .defaults import DEFAULTS, rng
from .eigen import laplacian_solve
from .exceptions import BasisCollapseWarning, DisconnectedGraph, EmptyGraph
from .graph import SparseGraph, is_connected, laplacian

logger = logging.getLogger(__name__)

# Terms whose quadratic form falls below this are along the constant direction.
_DENOMINATOR_FLOOR = 1e-12


@dataclass(frozen=True)
class KrylovBasis:
    """Orthonormal vectors spanning a Krylov subspace of the adjacency matrix."""

    vectors: np.ndarray
    seed: int

    @property
    def m(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True)
class NodeWeights:
    """Accumulated resistance of every (super)node at one contraction level.

    ``alive`` marks the nodes that still exist; a contracted pair survives
    as its smaller id.
    """

    eta: np.ndarray
    alive: np.ndarray
    level: int = 0

    @classmethod
    def zeros(cls, n: int) -> "NodeWeights":
        return cls(eta=np.zeros(n), alive=np.ones(n, dtype=bool), level=0)


def _check_pair(n: int, p: int, q: int):
    if not (0 <= p < n and 0 <= q < n):
        raise IndexError(f"Node pair ({p}, {q}) out of range for {n} nodes")
    if p == q:
        raise ValueError(f"Resistance needs two distinct nodes, got ({p}, {q})")


def _as_pairs(pairs, n: int) -> np.ndarray:
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if len(pairs):
        if pairs.min() < 0 or pairs.max() >= n:
            raise IndexError(f"Node pair out of range for {n} nodes")
        if np.any(pairs[:, 0] == pairs[:, 1]):
            raise ValueError("Resistance needs two distinct nodes")
    return pairs


def krylov_basis(g: SparseGraph, m: int, seed: int = 0) -> KrylovBasis:
    """Orthonormal basis of ``span(c, Ac, ..., A^(m-1) c)``.

    ``A`` is the adjacency matrix and ``c`` a random +-1 vector. Every
    vector is projected off the all-ones direction and orthogonalized twice
    by classical Gram-Schmidt. When the subspace is exhausted before ``m``
    vectors the shorter basis is returned with a warning.

    Args:
        g (SparseGraph): Graph to sample.
        m (int): Requested basis size, ``1 <= m <= n``.
        seed (int, optional): Seed of ``c``. Defaults to 0.

    Returns:
        KrylovBasis
    """
    n = g.n_nodes
    if n == 0:
        raise EmptyGraph("Cannot build a Krylov basis of an empty graph")
    if not 1 <= m <= n:
        raise ValueError(f"m must satisfy 1 <= m <= n = {n}, got {m}")

    c = rng(seed, "krylov").choice([-1.0, 1.0], size=n)
    if n > 1 and np.all(c == c[0]):
        c[0] = -c[0]
    basis = np.zeros((n, 0))
    x = c - c.mean()
    for _ in range(m):
        raw_norm = np.linalg.norm(x)
        for _ in range(2):
            x = x - basis @ (basis.T @ x)
        norm = np.linalg.norm(x)
        if norm <= 1e-12 * max(raw_norm, 1.0):
            warnings.warn(
                f"Krylov subspace exhausted after {basis.shape[1]} of {m} vectors",
                BasisCollapseWarning,
                stacklevel=2,
            )
            break
        x = x / norm
        basis = np.column_stack([basis, x])
        x = g.adjacency @ x
        x = x - x.mean()
    return KrylovBasis(vectors=basis, seed=seed)


def ritz_vectors(g: SparseGraph, basis: KrylovBasis):
    """Rotate the basis onto the Ritz vectors of the Laplacian.

    Returns ``(Z, theta)`` with ``Z = X R`` where ``X^T L X = R diag(theta) R^T``,
    so ``z_i^T L z_j`` vanishes for ``i != j`` and equals ``theta_i`` otherwise.
    """
    X = basis.vectors
    if X.shape[0] != g.n_nodes:
        raise ValueError(f"Basis of dimension {X.shape[0]} for a graph of {g.n_nodes} nodes")
    T = X.T @ (laplacian(g).matrix @ X)
    theta, R = np.linalg.eigh((T + T.T) / 2.0)
    return X @ R, theta


def estimate_resistances(g: SparseGraph, basis: KrylovBasis, pairs) -> np.ndarray:
    """Krylov estimate ``sum_i (z_i^T e_pq)^2 / (z_i^T L z_i)`` for many pairs.

    ``z_i`` are the Ritz vectors of the basis. The estimate never exceeds
    the exact resistance, grows as the basis grows and is exact once the
    basis spans the complement of the all-ones vector.
    """
    pairs = _as_pairs(pairs, g.n_nodes)
    Z, theta = ritz_vectors(g, basis)
    keep = theta >= _DENOMINATOR_FLOOR
    Z, theta = Z[:, keep], theta[keep]
    diff = Z[pairs[:, 0]] - Z[pairs[:, 1]]
    return np.sum(diff ** 2 / theta, axis=1)


def estimate_resistance(g: SparseGraph, basis: KrylovBasis, p: int, q: int) -> float:
    """Krylov-subspace estimate of the effective resistance between p and q."""
    _check_pair(g.n_nodes, p, q)
    return float(estimate_resistances(g, basis, [(p, q)])[0])


def exact_resistance(g: SparseGraph, p: int, q: int, tol: float = None) -> float:
    """Effective resistance ``e_pq^T L^+ e_pq`` through one Laplacian solve.

    Raises:
        DisconnectedGraph: ``g`` is not connected.
        NotConverged: The Laplacian solve did not converge.
    """
    _check_pair(g.n_nodes, p, q)
    if not is_connected(g):
        raise DisconnectedGraph("Effective resistance needs a connected graph")
    b = np.zeros(g.n_nodes)
    b[p], b[q] = 1.0, -1.0
    x = laplacian_solve(laplacian(g), b, tol)
    return float(x[p] - x[q])


def resistance_block(g: SparseGraph, nodes) -> np.ndarray:
    """Exact effective resistances among ``nodes``.

    Node 0 is grounded; the remaining Laplacian block is positive definite
    for a connected graph and is factorized once, then solved for one unit
    right-hand side per requested node.

    Returns:
        np.ndarray: Symmetric ``len(nodes) x len(nodes)`` matrix, zero diagonal.
    """
    nodes = np.asarray(nodes, dtype=np.int64)
    n = g.n_nodes
    if len(nodes) and (nodes.min() < 0 or nodes.max() >= n):
        raise IndexError(f"Node out of range for {n} nodes")
    if not is_connected(g):
        raise DisconnectedGraph("Effective resistance needs a connected graph")
    if n == 1 or len(nodes) == 0:
        return np.zeros((len(nodes), len(nodes)))

    grounded = laplacian(g).matrix.tocsc()[1:, 1:]
    lu = splu(grounded.tocsc())
    inner = nodes > 0
    rhs = np.zeros((n - 1, len(nodes)))
    rhs[nodes[inner] - 1, np.flatnonzero(inner)] = 1.0
    solved = lu.solve(rhs)

    gram = np.zeros((len(nodes), len(nodes)))
    gram[inner] = solved[nodes[inner] - 1]
    gram = (gram + gram.T) / 2.0
    diag = np.diag(gram)
    block = diag[:, None] + diag[None, :] - 2.0 * gram
    np.fill_diagonal(block, 0.0)
    return np.maximum(block, 0.0)


def exact_resistances(g: SparseGraph, pairs) -> np.ndarray:
    """Exact effective resistance of many node pairs at once."""
    pairs = _as_pairs(pairs, g.n_nodes)
    if len(pairs) == 0:
        return np.zeros(0)
    nodes, index = np.unique(pairs.ravel(), return_inverse=True)
    index = index.reshape(pairs.shape)
    block = resistance_block(g, nodes)
    return block[index[:, 0], index[:, 1]]


def edge_resistances(
    g: SparseGraph, method: str = "auto", krylov_m: int = None, seed: int = 0, exact_cutoff: int = None
) -> np.ndarray:
    """Effective resistance of every edge of ``g``, in ``g.edges()`` order.

    Args:
        method (str, optional): One of "auto", "exact", "krylov". "auto"
            is exact below ``exact_cutoff`` nodes. Defaults to "auto".
    """
    krylov_m = DEFAULTS["krylov_m"] if krylov_m is None else krylov_m
    exact_cutoff = DEFAULTS["exact_cutoff"] if exact_cutoff is None else exact_cutoff
    if method not in ("auto", "exact", "krylov"):
        raise KeyError(f"Unknown resistance method {method!r}. Allowed methods are auto, exact, krylov")
    if method == "auto":
        method = "exact" if g.n_nodes < exact_cutoff else "krylov"

    u, v, _ = g.edges()
    pairs = np.column_stack([u, v])
    logger.debug("Edge resistances of %s by %s", g, method)
    if method == "exact":
        return exact_resistances(g, pairs)
    basis = krylov_basis(g, min(krylov_m, g.n_nodes), seed)
    return estimate_resistances(g, basis, pairs)


def propagate_node_weights(eta: NodeWeights, p: int, q: int, d_eff: float) -> NodeWeights:
    """Contract ``(p, q)`` into a supernode and carry node weights one level up.

    The supernode keeps the smaller id and weighs
    ``eta(p) + eta(q) + d_eff(p, q)``; all other live nodes keep their weight.

    Raises:
        KeyError: ``p`` or ``q`` no longer exists at this level.
        ValueError: ``p == q`` or ``d_eff`` is negative.
    """
    n = len(eta.eta)
    _check_pair(n, p, q)
    if not (eta.alive[p] and eta.alive[q]):
        raise KeyError(f"Node {p if not eta.alive[p] else q} was contracted at an earlier level")
    if d_eff < 0:
        raise ValueError(f"Effective resistance must be non-negative, got {d_eff}")
    supernode, absorbed = min(p, q), max(p, q)
    weights = eta.eta.copy()
    alive = eta.alive.copy()
    weights[supernode] = eta.eta[p] + eta.eta[q] + d_eff
    weights[absorbed] = 0.0
    alive[absorbed] = False
    return NodeWeights(eta=weights, alive=alive, level=eta.level + 1)
