import numpy as np
import pytest

from placerl.graph import Edge, Graph, GraphKind, Node


def make_graph(compute, memory=None, edges=(), kind=GraphKind.DEVICE, ops=None, op_types=1):
    n = len(compute)
    memory = memory if memory is not None else [1.0] * n
    ops = ops if ops is not None else [0] * n
    nodes = tuple(Node(i, int(ops[i]), float(compute[i]), float(memory[i])) for i in range(n))
    es = tuple(Edge(int(e[0]), int(e[1]), float(e[2]) if len(e) > 2 else 1.0) for e in edges)
    return Graph(nodes, es, kind, op_types)


def grid_graph(n, edges):
    return make_graph([1.0] * n, [1.0] * n, edges, kind=GraphKind.GRID)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
