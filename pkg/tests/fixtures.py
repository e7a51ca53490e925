"""Small deterministic graphs shared by the test modules."""
import numpy as np

from stabilipy.graph import SparseGraph


def path_graph(n, weight=1.0):
    return SparseGraph.from_edges(n, np.arange(n - 1), np.arange(1, n), np.full(n - 1, weight))


def triangle():
    return SparseGraph.from_edges(3, [0, 1, 0], [1, 2, 2])


def complete_graph(n):
    u, v = np.triu_indices(n, k=1)
    return SparseGraph.from_edges(n, u, v)


def random_connected(n, p=0.3, seed=0):
    """Random weighted graph that contains the path 0-1-...-(n-1)."""
    generator = np.random.default_rng(seed)
    u, v = np.triu_indices(n, k=1)
    keep = generator.random(len(u)) < p
    u = np.concatenate([u[keep], np.arange(n - 1)])
    v = np.concatenate([v[keep], np.arange(1, n)])
    return SparseGraph.from_edges(n, u, v, generator.uniform(0.5, 2.0, len(u)))


def reweighted(g, seed=0):
    """Same edges as ``g`` with fresh random weights."""
    generator = np.random.default_rng(seed + 1000)
    u, v, _ = g.edges()
    return SparseGraph.from_edges(g.n_nodes, u, v, generator.uniform(0.5, 2.0, len(u)))


def three_cliques():
    """Three 5-cliques joined in a chain by single edges."""
    u, v = [], []
    for block in range(3):
        a, b = np.triu_indices(5, k=1)
        u.extend(a + 5 * block)
        v.extend(b + 5 * block)
    u.extend([4, 9])
    v.extend([5, 10])
    return SparseGraph.from_edges(15, u, v)


def random_regular(n, seed=0):
    """Unit-weight 4-regular graph made of two random Hamiltonian cycles with no shared edge."""
    generator = np.random.default_rng(seed)
    while True:
        cycles = [generator.permutation(n) for _ in range(2)]
        ends = [np.sort(np.column_stack([c, np.roll(c, -1)]), axis=1) for c in cycles]
        edges = np.vstack(ends)
        if len(np.unique(edges, axis=0)) == 2 * n:
            return SparseGraph.from_edges(n, edges[:, 0], edges[:, 1])
