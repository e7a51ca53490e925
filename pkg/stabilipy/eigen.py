"""Laplacian eigensolvers: smallest nonzero eigenpairs, the generalized
pencil ``L_X v = zeta L_Y v``, Laplacian solves and dense oracles.

The constant vector spans the Laplacian nullspace of a connected graph, so
every iterate is projected onto its orthogonal complement instead of
relying on shifts to push the zero eigenvalue away.
"""
import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse import csgraph
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, cg, eigsh

from .defaults import DEFAULTS, rng
from .exceptions import DimensionMismatch, DisconnectedGraph, NodeSetMismatch, NotConverged, OracleCapExceeded
from .graph import LaplacianMatrix

logger = logging.getLogger(__name__)

# Below this size (or when a fifth of the spectrum is requested) a dense
# symmetric eigendecomposition is both faster and exact.
DENSE_CUTOFF = 1000


@dataclass(frozen=True)
class EigenPairs:
    """Smallest nonzero Laplacian eigenpairs, ascending."""

    values: np.ndarray
    vectors: np.ndarray

    @property
    def k(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class GeneralizedSpectrum:
    """Largest eigenpairs of ``L_Y^+ L_X``, descending.

    Eigenvectors have unit Euclidean norm and are orthogonal to the
    all-ones vector.
    """

    values: np.ndarray
    vectors: np.ndarray

    @property
    def s(self) -> int:
        return len(self.values)


def _project(x):
    """Remove the component along the all-ones vector (columnwise)."""
    return x - x.mean(axis=0)


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip columns so that their first nonzero entry is positive."""
    vectors = vectors.copy()
    for j in range(vectors.shape[1]):
        column = vectors[:, j]
        cutoff = 1e-10 * np.abs(column).max()
        first = np.flatnonzero(np.abs(column) > cutoff)
        if len(first) and column[first[0]] < 0:
            vectors[:, j] = -column
    return vectors


def _normalize(vectors: np.ndarray) -> np.ndarray:
    vectors = _project(vectors)
    return vectors / np.linalg.norm(vectors, axis=0)


def _prefer_dense(n: int, k: int) -> bool:
    return n <= DENSE_CUTOFF or 5 * k >= n


def _require_connected(L: LaplacianMatrix, name: str = "graph"):
    n_components, _ = csgraph.connected_components(L.matrix, directed=False)
    if n_components != 1:
        raise DisconnectedGraph(f"The {name} has {n_components} connected components; it must be connected")


def smallest_eigenpairs(
    L: LaplacianMatrix, k: int, tol: float = None, seed: int = 0, maxiter: int = None
) -> EigenPairs:
    """Compute the ``k`` smallest nonzero eigenpairs of a connected Laplacian.

    Large problems run implicitly restarted Lanczos (ARPACK) on the
    operator ``shift*I - L`` restricted to the complement of the all-ones
    vector, where ``shift`` bounds the spectrum from above. Small problems
    use a dense symmetric eigendecomposition.

    Args:
        L (LaplacianMatrix): Laplacian of a connected graph.
        k (int): Number of eigenpairs, ``1 <= k < n``.
        tol (float, optional): Relative tolerance. Defaults to ``DEFAULTS["tol"]``.
        seed (int, optional): Seed of the start vector. Defaults to 0.
        maxiter (int, optional): Restart cap. Defaults to ``max(50*k, 300)``.

    Raises:
        ValueError: ``k`` is out of range.
        DisconnectedGraph: The graph is not connected.
        NotConverged: The iteration cap was hit.

    Returns:
        EigenPairs: Ascending eigenvalues, unit eigenvectors orthogonal to
        the all-ones vector, first nonzero entry of each vector positive.
    """
    tol = DEFAULTS["tol"] if tol is None else tol
    n = L.n
    if not 1 <= k < n:
        raise ValueError(f"k must satisfy 1 <= k < n = {n}, got {k}")
    _require_connected(L)
    shift = 2.0 * L.degree.max() + 1.0  # Gershgorin bound on lambda_max, plus margin

    if _prefer_dense(n, k):
        logger.debug("Dense eigendecomposition, n=%d k=%d", n, k)
        values, vectors = scipy.linalg.eigh(L.toarray())
        values, vectors = values[1 : k + 1], vectors[:, 1 : k + 1]
    else:
        logger.debug("Lanczos eigensolver, n=%d k=%d shift=%.3e", n, k, shift)
        operator = LinearOperator((n, n), matvec=lambda x: _project(shift * x - L.matrix @ x), dtype=float)
        v0 = _project(rng(seed, "eigensolver").uniform(-1.0, 1.0, n))
        try:
            theta, vectors = eigsh(
                operator, k=k, which="LA", tol=tol, v0=v0, maxiter=maxiter or max(50 * k, 300)
            )
        except ArpackNoConvergence as err:
            raise NotConverged(
                f"Lanczos found {len(err.eigenvalues)} of {k} eigenpairs before the iteration cap"
            ) from err
        values = shift - theta
        order = np.argsort(values, kind="stable")
        values, vectors = values[order], vectors[:, order]

    vectors = _fix_signs(_normalize(vectors))
    residuals = np.linalg.norm(L.matrix @ vectors - vectors * values, axis=0)
    bound = tol * max(shift, 1.0)
    if residuals.max() > bound:
        logger.warning("Eigenpair residual %.3e exceeds %.3e", residuals.max(), bound)
    logger.debug("Smallest eigenvalues %s", values[: min(k, 5)])
    return EigenPairs(values=values, vectors=vectors)


def generalized_eigenpairs(
    L_X: LaplacianMatrix,
    L_Y: LaplacianMatrix,
    s: int,
    tol: float = None,
    seed: int = 0,
    solve_tol: float = None,
    maxiter: int = None,
) -> GeneralizedSpectrum:
    """Compute the ``s`` largest eigenpairs of ``L_Y^+ L_X``.

    On the complement of the all-ones vector this is the pencil
    ``(L_X, L_Y + 11^T/n)``, which is symmetric-definite. Its inverse
    operator is a Laplacian solve with ``L_Y`` plus the mean, so ``L_Y^+``
    is never formed. The all-ones vector has eigenvalue 0 in this pencil and
    is never among the largest.

    Args:
        L_X (LaplacianMatrix): Input-manifold Laplacian.
        L_Y (LaplacianMatrix): Output-manifold Laplacian on the same nodes.
        s (int): Number of eigenpairs, ``1 <= s <= n-1``.
        tol (float, optional): Eigensolver tolerance.
        seed (int, optional): Seed of the start vector.
        solve_tol (float, optional): Tolerance of the inner Laplacian solves.
        maxiter (int, optional): Restart cap.

    Raises:
        NodeSetMismatch: The Laplacians differ in size.
        DisconnectedGraph: Either graph is disconnected.
        NotConverged: The iteration cap was hit.

    Returns:
        GeneralizedSpectrum: Descending eigenvalues and unit eigenvectors.
    """
    tol = DEFAULTS["tol"] if tol is None else tol
    solve_tol = DEFAULTS["solve_tol"] if solve_tol is None else solve_tol
    n = L_X.n
    if L_Y.n != n:
        raise NodeSetMismatch(f"Input manifold has {n} nodes, output manifold has {L_Y.n}")
    if not 1 <= s <= n - 1:
        raise ValueError(f"s must satisfy 1 <= s <= n-1 = {n - 1}, got {s}")
    _require_connected(L_X, "input manifold")
    _require_connected(L_Y, "output manifold")

    if _prefer_dense(n, s) or s >= n - 1:
        logger.debug("Dense generalized eigendecomposition, n=%d s=%d", n, s)
        values, vectors = scipy.linalg.eigh(L_X.toarray(), L_Y.toarray() + 1.0 / n)
        values, vectors = values[::-1][:s], vectors[:, ::-1][:, :s]
    else:
        logger.debug("Lanczos generalized eigensolver, n=%d s=%d", n, s)
        A = LinearOperator((n, n), matvec=lambda x: L_X.matrix @ x, dtype=float)
        M = LinearOperator((n, n), matvec=lambda x: L_Y.matrix @ x + x.mean(axis=0), dtype=float)
        Minv = LinearOperator(
            (n, n),
            matvec=lambda b: laplacian_solve(L_Y, _project(np.ravel(b)), solve_tol) + np.mean(b),
            dtype=float,
        )
        v0 = _project(rng(seed, "eigensolver").uniform(-1.0, 1.0, n))
        try:
            values, vectors = eigsh(
                A, k=s, M=M, Minv=Minv, which="LA", tol=tol, v0=v0, maxiter=maxiter or max(50 * s, 300)
            )
        except ArpackNoConvergence as err:
            raise NotConverged(
                f"Generalized Lanczos found {len(err.eigenvalues)} of {s} eigenpairs before the iteration cap"
            ) from err
        order = np.argsort(-values, kind="stable")
        values, vectors = values[order], vectors[:, order]

    values = np.maximum(values, np.finfo(float).tiny)
    vectors = _fix_signs(_normalize(vectors))
    residuals = np.linalg.norm(L_X.matrix @ vectors - (L_Y.matrix @ vectors) * values, axis=0)
    scale = max(1.0, 2.0 * L_X.degree.max(), 2.0 * values[0] * L_Y.degree.max())
    if residuals.max() > max(tol, solve_tol) * scale:
        logger.warning("Generalized eigenpair residual %.3e exceeds %.3e", residuals.max(), tol * scale)
    return GeneralizedSpectrum(values=values, vectors=vectors)


def dense_pseudoinverse(L: LaplacianMatrix, cap: int = None) -> np.ndarray:
    """Moore-Penrose pseudoinverse of a Laplacian, for test oracles.

    Raises:
        OracleCapExceeded: ``L`` has more than ``cap`` rows.
    """
    cap = DEFAULTS["oracle_cap"] if cap is None else cap
    if L.n > cap:
        raise OracleCapExceeded(f"Dense pseudoinverse of {L.n} nodes exceeds the oracle cap of {cap}")
    # Eigenvalues below 1e-10 * lambda_max are treated as the nullspace.
    pinv = scipy.linalg.pinvh(L.toarray(), rtol=1e-10)
    return (pinv + pinv.T) / 2.0


def laplacian_solve(L: LaplacianMatrix, b, tol: float = None, maxiter: int = None) -> np.ndarray:
    """Solve ``L x = b`` for ``b`` orthogonal to the all-ones vector.

    Runs Jacobi-preconditioned conjugate gradients and returns the solution
    orthogonal to the all-ones vector.

    Raises:
        DimensionMismatch: ``b`` has the wrong length.
        NotConverged: The residual is above ``tol * |b|`` after ``maxiter``
            iterations.
    """
    tol = DEFAULTS["solve_tol"] if tol is None else tol
    b = np.asarray(b, dtype=float)
    if b.shape != (L.n,):
        raise DimensionMismatch(f"Right-hand side of shape {b.shape} for a Laplacian of size {L.n}")
    b = _project(b)
    b_norm = np.linalg.norm(b)
    if b_norm == 0:
        return np.zeros(L.n)

    inverse_degree = np.divide(1.0, L.degree, out=np.zeros(L.n), where=L.degree > 0)
    x, info = cg(
        L.matrix, b, rtol=tol, atol=0.0, maxiter=maxiter or 10 * L.n, M=sp.diags(inverse_degree)
    )
    x = _project(x)
    residual = np.linalg.norm(L.matrix @ x - b)
    if info != 0 and residual > tol * b_norm:
        raise NotConverged(f"Conjugate gradients stopped at relative residual {residual / b_norm:.3e}")
    return x
