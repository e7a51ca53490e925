"""Console script for stabilipy."""
import functools
import logging
import sys
import warnings

import click
import numpy as np

from . import __version__
from .datasets import sbm, write_dataset
from .defaults import read_config, resolve_config
from .dmd import StabilityReport, max_dmd, rank_and_select, score_nodes
from .embedding import eigengap_report, resistance_correlation, spectral_embed
from .enhancement import enhance, enhancement_experiment, inter_cluster_edges
from .exceptions import DisconnectedWarning, NodeSetMismatch, NotConverged, StabilipyError
from .formats import (
    dump_json,
    load_json,
    read_features,
    read_labels,
    sidecar,
    write_features,
    write_matrix,
    write_table,
)
from .graph import is_connected, largest_component, read_edgelist, write_edgelist
from .manifold import (
    ManifoldConfig,
    build_input_manifold,
    build_output_manifold,
    default_target_clusters,
    load_manifold,
    save_manifold,
)
from .model import (
    load_outputs,
    perturb,
    segment_table,
    separation_experiment,
    surrogate_forward,
    surrogate_weights,
)
from .selftest import run_selftest

logger = logging.getLogger(__name__)

EXIT_VALIDATION = 2
EXIT_NOT_CONVERGED = 3

INPUT = click.Path(exists=True, dir_okay=False)


def _handle_errors(func):
    """Map library errors to exit codes: 2 for bad input, 3 for solver failure."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except NotConverged as err:
            click.echo(f"Error: {err}", err=True)
            sys.exit(EXIT_NOT_CONVERGED)
        except (StabilipyError, FileNotFoundError, ValueError, KeyError, IndexError) as err:
            click.echo(f"Error: {err}", err=True)
            sys.exit(EXIT_VALIDATION)

    return wrapper


def _config(config_path, **flags) -> dict:
    return resolve_config(read_config(config_path) if config_path else None, flags)


def _parse_floats(text):
    return None if text is None else tuple(float(x) for x in text.split(","))


def _load_inputs(graph, features=None, labels=None, outputs=None):
    """Read a graph and its aligned node files, keeping the largest component.

    Returns ``(g, X, y, Y)`` with None for every file not given.
    """
    g = read_edgelist(graph)
    X = read_features(features) if features else None
    y = read_labels(labels) if labels else None
    Y = load_outputs(outputs, g.n_nodes).Y if outputs else None
    for name, rows in (("features", X), ("labels", y)):
        if rows is not None and len(rows) != g.n_nodes:
            raise NodeSetMismatch(f"{name} file has {len(rows)} rows for a graph of {g.n_nodes} nodes")
    if not is_connected(g):
        g, remap = largest_component(g)
        warnings.warn(f"Graph is disconnected; keeping {g.n_nodes} nodes of its largest component", DisconnectedWarning)
        keep = np.array(sorted(remap, key=remap.get), dtype=np.int64)
        X = None if X is None else X[keep]
        y = None if y is None else y[keep]
        Y = None if Y is None else Y[keep]
    return g, X, y, Y


def _write_outputs(path, Y):
    if str(path).endswith(".csv"):
        write_features(path, Y)
    else:
        write_matrix(path, Y)


@click.group()
@click.version_option(__version__)
@click.option("-v", "--verbose", count=True, help="-v for INFO, -vv for DEBUG logging.")
def main(verbose):
    """Stability analysis of graph models through graph-based manifolds."""
    level = logging.WARNING if verbose == 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s")


@main.command()
@click.option("--graph", required=True, type=INPUT, help="Tab-separated edge list.")
@click.option("--k", type=int, help="Embedding dimension.")
@click.option("--labels", type=INPUT, help="Labels file, for the 10 x classes heuristic.")
@click.option("--correlation-pairs", type=int, default=0, show_default=True,
              help="Node pairs for the exact-resistance correlation check (0 skips it).")
@click.option("--seed", type=int)
@click.option("--tol", type=float)
@click.option("--config", "config_path", type=INPUT)
@click.option("--out", required=True, type=click.Path(dir_okay=False),
              help="SGMX matrix; a JSON report goes next to it.")
@_handle_errors
def embed(graph, k, labels, correlation_pairs, seed, tol, config_path, out):
    """Weighted spectral embedding of a graph with its eigengap report."""
    config = _config(config_path, k=k, seed=seed, tol=tol)
    g, _, y, _ = _load_inputs(graph, labels=labels)
    k = min(config["k"], g.n_nodes - 1)
    U = spectral_embed(g, k, tol=config["tol"], seed=config["seed"])
    n_classes = None if y is None else int(y.max()) + 1
    report = eigengap_report(g, k, n_classes=n_classes, tol=config["tol"], seed=config["seed"]).to_dict()
    if correlation_pairs:
        report["resistance_correlation"] = resistance_correlation(g, U, correlation_pairs, config["seed"])
    write_matrix(out, U.U)
    dump_json(dict(report, config=config), sidecar(out))
    click.echo(f"Embedded {g.n_nodes} nodes into {U.k} dimensions")


@main.command()
@click.option("--graph", required=True, type=INPUT)
@click.option("--features", type=INPUT, help="Feature CSV or SGMX matrix.")
@click.option("--outputs", type=INPUT, help="Model outputs; builds the output manifold instead.")
@click.option("--labels", type=INPUT)
@click.option("--k", type=int)
@click.option("--knn", type=int)
@click.option("--diameter", type=float)
@click.option("--clusters", type=int, help="Target cluster count when no diameter is given.")
@click.option("--rho-threshold", type=float)
@click.option("--seed", type=int)
@click.option("--threads", type=int)
@click.option("--config", "config_path", type=INPUT)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@_handle_errors
def manifold(
    graph, features, outputs, labels, k, knn, diameter, clusters, rho_threshold, seed, threads, config_path, out,
):
    """Build the input (or, with --outputs, output) graph-based manifold."""
    config = _config(
        config_path, k=k, knn=knn, diameter=diameter, clusters=clusters, rho_threshold=rho_threshold,
        seed=seed, threads=threads,
    )
    g, X, y, Y = _load_inputs(graph, features, labels, outputs)
    if config["clusters"] is None and y is not None:
        config["clusters"] = default_target_clusters(g.n_nodes, int(y.max()) + 1)
    cfg = ManifoldConfig.from_config(config)
    if outputs:
        m = build_output_manifold(Y, cfg, node_ids=g.node_ids)
    else:
        m = build_input_manifold(g, X, cfg, k=config["k"], tol=config["tol"])
    save_manifold(m, out)
    click.echo(f"Manifold with {m.graph.n_edges} edges over {m.n_clusters} clusters")


@main.command()
@click.option("--input-manifold", required=True, type=INPUT)
@click.option("--output-manifold", type=INPUT)
@click.option("--outputs", type=INPUT, help="Model outputs; the output manifold is built from them.")
@click.option("--s", type=int, help="Generalized eigenpairs.")
@click.option("--fraction", type=float)
@click.option("--knn", type=int)
@click.option("--diameter", type=float, help="Resistance diameter of the output manifold.")
@click.option("--clusters", type=int, help="Target cluster count of the output manifold.")
@click.option("--rho-threshold", type=float)
@click.option("--estimate-dmd", is_flag=True, help="Also estimate the maximum pairwise distortion.")
@click.option("--oracle-cap", type=int)
@click.option("--seed", type=int)
@click.option("--threads", type=int)
@click.option("--config", "config_path", type=INPUT)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@_handle_errors
def score(
    input_manifold, output_manifold, outputs, s, fraction, knn, diameter, clusters, rho_threshold, estimate_dmd,
    oracle_cap, seed, threads, config_path, out,
):
    """Rank nodes by stability and write the report JSON."""
    if bool(output_manifold) == bool(outputs):
        raise click.UsageError("Give exactly one of --output-manifold and --outputs")
    config = _config(
        config_path, s=s, fraction=fraction, knn=knn, diameter=diameter, clusters=clusters,
        rho_threshold=rho_threshold, oracle_cap=oracle_cap, seed=seed, threads=threads,
    )
    m_x = load_manifold(input_manifold)
    if outputs:
        Y = load_outputs(outputs, m_x.n_nodes).Y
        m_y = build_output_manifold(Y, ManifoldConfig.from_config(config), node_ids=m_x.graph.node_ids)
    else:
        m_y = load_manifold(output_manifold)
    scores = score_nodes(
        m_x, m_y, s=config["s"], tol=config["tol"], seed=config["seed"], solve_tol=config["solve_tol"]
    )
    dmd = max_dmd(m_x, m_y, config["oracle_cap"], config["dmd_samples"], config["seed"]) if estimate_dmd else None
    report = rank_and_select(
        scores, config["fraction"], dmd_max=dmd, clusters=m_x.clusters, node_ids=m_x.graph.node_ids, config=config
    )
    report.to_json(out)
    click.echo(f"lambda_max {report.lambda_max:.6g}; {len(report.unstable)} unstable, {len(report.stable)} stable")


@main.command()
@click.option("--graph", required=True, type=INPUT)
@click.option("--features", required=True, type=INPUT)
@click.option("--labels", type=INPUT)
@click.option("--classes", type=int, help="Output classes when no labels are given.")
@click.option("--hidden", type=int)
@click.option("--seed", type=int)
@click.option("--config", "config_path", type=INPUT)
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="SGMX, or CSV when it ends in .csv.")
@_handle_errors
def forward(graph, features, labels, classes, hidden, seed, config_path, out):
    """Run the surrogate model and write its outputs.

    With --labels the readout is fitted to them; otherwise all weights are random.
    """
    config = _config(config_path, hidden=hidden, seed=seed)
    g, X, y, _ = _load_inputs(graph, features, labels)
    n_classes = classes or (int(y.max()) + 1 if y is not None else 2)
    W1, W2 = surrogate_weights(g, X, y, config["hidden"], n_classes, config["seed"])
    _write_outputs(out, surrogate_forward(g, X, W1, W2).Y)
    click.echo(f"Wrote {g.n_nodes} x {n_classes} outputs")


@main.command(name="perturb")
@click.option("--graph", required=True, type=INPUT)
@click.option("--features", type=INPUT)
@click.option("--labels", type=INPUT)
@click.option("--kind", type=click.Choice(["gaussian", "dice"]), required=True)
@click.option("--level", type=float, required=True, help="Noise scale, or node pairs for DICE.")
@click.option("--seed", type=int)
@click.option("--config", "config_path", type=INPUT)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@_handle_errors
def perturb_command(graph, features, labels, kind, level, seed, config_path, out):
    """Perturb features (gaussian) or edges (dice)."""
    config = _config(config_path, seed=seed)
    g, X, y, _ = _load_inputs(graph, features, labels)
    if kind == "gaussian" and X is None:
        raise click.UsageError("--kind gaussian needs --features")
    g_pert, X_pert = perturb(g, X, kind, level, y, config["seed"])
    if kind == "gaussian":
        write_features(out, X_pert)
    else:
        write_edgelist(g_pert, out)
        dump_json(dict(g_pert.attrs["dice"], config=config), sidecar(out))
    click.echo(f"Wrote {kind} perturbation at level {level:g}")


@main.command(name="eval")
@click.option("--report", required=True, type=INPUT)
@click.option("--clean", required=True, type=INPUT)
@click.option("--perturbed", required=True, type=INPUT)
@click.option("--level", type=float, default=0.0, show_default=True, help="Level recorded in the table.")
@click.option("--fractions", help="Segment shares, e.g. 0.2,0.6,0.2.")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@_handle_errors
def eval_command(report, clean, perturbed, level, fractions, out):
    """Mean cosine similarity and KL divergence per stability segment."""
    stability = StabilityReport.from_dict(load_json(report))
    n = len(stability.scores)
    df = segment_table(stability, load_outputs(clean, n), {level: load_outputs(perturbed, n)}, _parse_floats(fractions))
    df.attrs = dict(stability.config, fractions=fractions)
    write_table(df, out)
    click.echo(df.to_string(index=False))


@main.command(name="enhance")
@click.option("--graph", required=True, type=INPUT)
@click.option("--manifold", "manifold_path", required=True, type=INPUT)
@click.option("--scale", type=float, default=1.0, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@_handle_errors
def enhance_command(graph, manifold_path, scale, out):
    """Insert the inter-cluster manifold edges into the graph."""
    g, _, _, _ = _load_inputs(graph)
    m = load_manifold(manifold_path)
    if not np.array_equal(g.node_ids, m.graph.node_ids):
        raise NodeSetMismatch("Graph and manifold have different node sets")
    enhanced = enhance(g, inter_cluster_edges(m), scale)
    write_edgelist(enhanced, out)
    dump_json(dict(enhanced.attrs["enhancement"], source=graph, manifold=manifold_path), sidecar(out))
    click.echo(f"Inserted {enhanced.attrs['enhancement']['inserted']} edges")


@main.command()
@click.option("--graph", required=True, type=INPUT)
@click.option("--features", required=True, type=INPUT)
@click.option("--labels", required=True, type=INPUT)
@click.option("--kind", type=click.Choice(["gaussian", "dice", "enhance"]), default="gaussian", show_default=True)
@click.option("--levels", help="Comma-separated levels.")
@click.option("--fractions", help="Segment shares, e.g. 0.2,0.6,0.2.")
@click.option("--scale", type=float, default=1.0, show_default=True)
@click.option("--seed", type=int)
@click.option("--config", "config_path", type=INPUT)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@_handle_errors
def experiment(graph, features, labels, kind, levels, fractions, scale, seed, config_path, out):
    """Separation or enhancement experiment with the surrogate model."""
    config = _config(config_path, seed=seed)
    g, X, y, _ = _load_inputs(graph, features, labels)
    config["clusters"] = config["clusters"] or default_target_clusters(g.n_nodes, int(y.max()) + 1)
    if kind == "enhance":
        level = int(_parse_floats(levels)[0]) if levels else 20
        df = enhancement_experiment(g, X, y, level=level, weight_scale=scale, config=config)
    else:
        default_levels = (0.4, 0.8, 1.2) if kind == "gaussian" else (10, 20, 40)
        df = separation_experiment(
            g, X, y, kind=kind, levels=_parse_floats(levels) or default_levels,
            fractions=_parse_floats(fractions), config=config,
        )
    write_table(df, out)
    click.echo(df.to_string(index=False))


@main.command()
@click.option("--sizes", default="60,60,60,60,60", show_default=True, help="Block sizes.")
@click.option("--p-in", type=float, default=0.2, show_default=True)
@click.option("--p-out", type=float, default=0.01, show_default=True)
@click.option("--n-features", type=int, default=16, show_default=True)
@click.option("--signal", type=float, default=1.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(file_okay=False))
@_handle_errors
def gen(sizes, p_in, p_out, n_features, signal, seed, out):
    """Generate a stochastic block model dataset."""
    block_sizes = tuple(int(x) for x in sizes.split(","))
    g, X, y = sbm(block_sizes, p_in, p_out, n_features, signal, seed)
    paths = write_dataset(out, g, X, y)
    click.echo(f"Wrote {g.n_nodes} nodes and {g.n_edges} edges to {paths['graph'].parent}")


@main.command()
def selftest():
    """Run the built-in closed-form checks."""
    for name, passed, message in run_selftest():
        click.echo(f"{'ok  ' if passed else 'FAIL'} {name} {message}".rstrip())
        if not passed:
            sys.exit(1)


if __name__ == "__main__":
    sys.exit(main())  # pragma: no cover
