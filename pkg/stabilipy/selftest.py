"""Small closed-form checks of the whole toolkit, runnable without a test runner."""
import logging

import numpy as np

from .dmd import cmd, dmd_pair, lipschitz_bound, rank_and_select, score_nodes
from .eigen import dense_pseudoinverse, generalized_eigenpairs, smallest_eigenpairs
from .embedding import approx_resistance, spectral_embed
from .graph import SparseGraph, laplacian
from .manifold import ManifoldConfig, cluster_backbone, knn_graph, pgm_objective, sparsify
from .model import eval_pair, perturb_gaussian, surrogate_forward
from .resistance import edge_resistances, estimate_resistance, exact_resistance, krylov_basis

logger = logging.getLogger(__name__)


class CheckFailed(AssertionError):
    pass


def _close(actual, expected, tol=1e-8, what=""):
    if not np.allclose(actual, expected, rtol=tol, atol=tol):
        raise CheckFailed(f"{what}: expected {expected}, got {actual}")


def _path(n, weight=1.0):
    return SparseGraph.from_edges(n, np.arange(n - 1), np.arange(1, n), np.full(n - 1, weight))


def _triangle():
    return SparseGraph.from_edges(3, [0, 1, 0], [1, 2, 2])


def _random_graph(n, seed):
    generator = np.random.default_rng(seed)
    u, v = np.triu_indices(n, k=1)
    keep = generator.random(len(u)) < 0.3
    # a path keeps it connected
    u = np.concatenate([u[keep], np.arange(n - 1)])
    v = np.concatenate([v[keep], np.arange(1, n)])
    return SparseGraph.from_edges(n, u, v, generator.uniform(0.5, 2.0, len(u)))


def check_knn_weights():
    g = knn_graph([[0.0, 0.0], [1.0, 1.0]], 1)
    _, _, w = g.edges()
    _close(w, [0.5], what="kNN weight of two points")


def check_triangle_resistance():
    g = _triangle()
    _close(exact_resistance(g, 0, 1), 2.0 / 3.0, what="triangle resistance")
    _close(edge_resistances(g, "exact"), [2.0 / 3.0] * 3, what="triangle edge resistances")


def check_path_resistance():
    _close(exact_resistance(_path(4), 0, 3), 3.0, what="path resistance")


def check_krylov_single_edge():
    g = SparseGraph.from_edges(2, [0], [1], [4.0])
    _close(estimate_resistance(g, krylov_basis(g, 1), 0, 1), 0.25, what="Krylov estimate on one edge")


def check_path_spectrum():
    values = smallest_eigenpairs(laplacian(_path(4)), 3).values
    expected = 2.0 - 2.0 * np.cos(np.pi * np.arange(1, 4) / 4.0)
    _close(values, expected, what="path spectrum")


def check_full_embedding_exact():
    g = _random_graph(20, seed=1)
    U = spectral_embed(g, 19)
    pinv = dense_pseudoinverse(laplacian(g))
    exact = pinv[0, 0] + pinv[5, 5] - 2 * pinv[0, 5]
    _close(approx_resistance(U, 0, 5), exact, tol=1e-6, what="full-spectrum embedding resistance")


def check_backbone_triangle():
    g = _triangle()
    kept = cluster_backbone(g, edge_resistances(g, "exact"), 0.9)
    if len(kept) != 2:
        raise CheckFailed(f"triangle backbone: expected 2 edges, got {len(kept)}")


def check_sparsify_tree():
    g = _path(6)
    m = sparsify(g, ManifoldConfig(resistance_diameter=2.0))
    if m.graph.n_edges != 5:
        raise CheckFailed("sparsifying a tree removed edges")


def check_pgm_single_edge():
    L = laplacian(SparseGraph.from_edges(2, [0], [1]))
    _close(pgm_objective(L, np.zeros((2, 1)), sigma=1.0), np.log(3.0), what="PGM objective of one edge")


def check_distortion_scaling():
    g = _random_graph(12, seed=2)
    half = SparseGraph(g.adjacency * 0.5)
    _close(dmd_pair(g, g, 0, 7), 1.0, what="identity distortion")
    _close(dmd_pair(g, half, 0, 7), 2.0, what="halved-weight distortion")
    spectrum = generalized_eigenpairs(laplacian(g), laplacian(half), 3)
    _close(lipschitz_bound(spectrum), 2.0, what="halved-weight Lipschitz bound")
    _close(cmd(g, SparseGraph(g.adjacency * 2.0), [0, 1, 2]), 2.0, what="doubled-weight cut distortion")


def check_ranking():
    report = rank_and_select(np.arange(100, dtype=float), 0.01)
    if list(report.unstable) != [99] or list(report.stable) != [0]:
        raise CheckFailed("rank_and_select picked the wrong ends")
    scores = score_nodes(_path(5), _path(5), s=2)
    if not np.all(scores.node_scores >= 0):
        raise CheckFailed("negative stability score")


def check_output_metrics():
    uniform = np.full((1, 2), 0.5)
    skewed = np.array([[0.7, 0.3]])
    kld = eval_pair(uniform, skewed)["kld"].iloc[0]
    _close(kld, 0.5 * np.log(0.5 / 0.7) + 0.5 * np.log(0.5 / 0.3), tol=1e-6, what="KL divergence")
    Y = surrogate_forward(_path(4), np.zeros((4, 3)), np.ones((3, 2)), np.ones((2, 2))).Y
    _close(Y, 0.5, what="surrogate output of zero features")
    X = np.ones((3, 2))
    _close(perturb_gaussian(X, 0.0), X, what="zero-level Gaussian perturbation")


CHECKS = (
    check_knn_weights,
    check_triangle_resistance,
    check_path_resistance,
    check_krylov_single_edge,
    check_path_spectrum,
    check_full_embedding_exact,
    check_backbone_triangle,
    check_sparsify_tree,
    check_pgm_single_edge,
    check_distortion_scaling,
    check_ranking,
    check_output_metrics,
)


def run_selftest(stop_on_failure: bool = True) -> list:
    """Run every check and return ``(name, passed, message)`` tuples."""
    results = []
    for check in CHECKS:
        name = check.__name__[len("check_"):]
        try:
            check()
        except CheckFailed as err:
            logger.error("%s failed: %s", name, err)
            results.append((name, False, str(err)))
            if stop_on_failure:
                break
        else:
            logger.info("%s passed", name)
            results.append((name, True, ""))
    return results
