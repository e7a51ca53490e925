"""End-to-end stability analysis of a graph, its features and model outputs."""
import logging
from dataclasses import dataclass

import numpy as np

from .defaults import resolve_config
from .dmd import StabilityReport, StabilityScores, lipschitz_bound, max_dmd, rank_and_select, score_nodes
from .exceptions import NodeSetMismatch
from .manifold import Manifold, ManifoldConfig, build_input_manifold, build_output_manifold, knn_graph

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineResult:
    input_manifold: Manifold
    output_manifold: Manifold
    scores: StabilityScores
    report: StabilityReport
    config: dict


def run_pipeline(g, X, outputs, config: dict = None, gdr: bool = True, estimate_dmd: bool = False) -> PipelineResult:
    """Score the stability of every node of ``g``.

    Builds the input manifold from the graph and its features, the output
    manifold from the model outputs, then ranks nodes by distance mapping
    distortion.

    Args:
        g (SparseGraph): Connected input graph.
        X (array-like): Node features, one row per node, or None.
        outputs (ModelOutputs or array-like): Post-softmax model outputs.
        config (dict, optional): Overrides of ``DEFAULTS``.
        gdr (bool, optional): Build reduced manifolds. With False the input
            manifold is ``g`` itself and the output manifold the raw kNN
            graph of the outputs. Defaults to True.
        estimate_dmd (bool, optional): Also compute the maximum pairwise
            distortion. Defaults to False.

    Returns:
        PipelineResult
    """
    config = resolve_config(None, config)
    cfg = ManifoldConfig.from_config(config)
    Y = np.asarray(getattr(outputs, "Y", outputs), dtype=float)
    if Y.shape[0] != g.n_nodes:
        raise NodeSetMismatch(f"Outputs have {Y.shape[0]} rows for a graph of {g.n_nodes} nodes")

    if gdr:
        input_manifold = build_input_manifold(g, X, cfg, k=config["k"], tol=config["tol"])
        output_manifold = build_output_manifold(Y, cfg, node_ids=g.node_ids)
    else:
        input_manifold = Manifold.from_graph(g, {"gdr": False})
        dense = knn_graph(Y, cfg.knn_k, bridge=True, n_jobs=cfg.n_jobs, node_ids=g.node_ids)
        output_manifold = Manifold.from_graph(dense, {"gdr": False})

    scores = score_nodes(
        input_manifold, output_manifold, s=config["s"], tol=config["tol"], seed=config["seed"],
        solve_tol=config["solve_tol"],
    )
    dmd = None
    if estimate_dmd:
        dmd = max_dmd(
            input_manifold, output_manifold, config["oracle_cap"], config["dmd_samples"], config["seed"]
        )
    report = rank_and_select(
        scores,
        config["fraction"],
        lambda_max=lipschitz_bound(scores.spectrum),
        dmd_max=dmd,
        clusters=input_manifold.clusters,
        node_ids=g.node_ids,
        config=dict(config, gdr=gdr),
    )
    logger.info("Selected %d stable and %d unstable nodes", len(report.stable), len(report.unstable))
    return PipelineResult(input_manifold, output_manifold, scores, report, config)
