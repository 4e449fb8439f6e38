import numpy as np
import pytest

from fluidrank.graph import SparseGraph


def random_graph(rng, n, max_out=4, dangling_frac=0.3):
    """Random simple digraph; roughly dangling_frac of nodes get no out-links."""
    dangling = rng.random(n) < dangling_frac
    src, dst = [], []
    for j in range(n):
        if dangling[j]:
            continue
        k = min(int(rng.integers(1, max_out + 1)), n - 1)
        targets = rng.choice(n - 1, size=k, replace=False)
        targets = targets + (targets >= j)  # shift past j to avoid self-loops
        src.extend([j] * k)
        dst.extend(int(t) for t in targets)
    if not src:
        src, dst = [0], [1]
    return SparseGraph.from_edges(n, src, dst)


def dense_transition(graph):
    """The stored substochastic matrix, densely (dangling columns zero)."""
    matrix = np.zeros((graph.n, graph.n))
    for j in range(graph.n):
        kids = graph.children(j)
        if kids.size:
            matrix[kids, j] = 1.0 / kids.size
    return matrix


def dense_completed(graph, teleport):
    """Dangling columns replaced by the teleport vector."""
    matrix = dense_transition(graph)
    for j in graph.dangling:
        matrix[:, j] = teleport
    return matrix


def solve_unnormalized(graph, params):
    """Direct solve of h = d*P*h + (1-d)*v with the uncompleted matrix."""
    v = params.teleport_vector(graph.n)
    matrix = dense_transition(graph)
    return np.linalg.solve(np.eye(graph.n) - params.damping * matrix,
                           (1.0 - params.damping) * v)


def solve_pagerank(graph, params):
    """Direct solve against the completed matrix; sums to one."""
    v = params.teleport_vector(graph.n)
    matrix = dense_completed(graph, v)
    return np.linalg.solve(np.eye(graph.n) - params.damping * matrix,
                           (1.0 - params.damping) * v)


@pytest.fixture
def two_cycle():
    return SparseGraph.from_edges(2, [0, 1], [1, 0])


@pytest.fixture
def chain_with_dangling():
    return SparseGraph.from_edges(2, [0], [1])
