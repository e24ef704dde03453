"""Input graphs: data model, validation, JSON I/O, synthetic generators.

Edges are stored directed. The encoder and grid environment look at the
undirected adjacency through :func:`neighbors`.
"""

from __future__ import annotations

import enum
import heapq
import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import CycleError, InvalidParams, ParseError, ValidationError


class GraphKind(str, enum.Enum):
    DEVICE = "device"
    GRID = "grid"


class Family(str, enum.Enum):
    CHAIN = "chain"
    LAYERED = "layered"
    RANDOM_DAG = "random-dag"


@dataclass(frozen=True)
class Node:
    id: int
    op_type: int
    compute: float
    memory: float


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    bytes: float


@dataclass(frozen=True, eq=True)
class Graph:
    """Immutable placement input.

    ``op_types`` is the size of the op-type vocabulary; node features one-hot
    encode ``op_type`` against it.
    """

    nodes: tuple[Node, ...]
    edges: tuple[Edge, ...]
    kind: GraphKind = GraphKind.DEVICE
    op_types: int = 1

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(self.edges))
        object.__setattr__(self, "kind", GraphKind(self.kind))

    @property
    def n(self) -> int:
        return len(self.nodes)

    # Array views below assume a validated graph (nodes sorted by id).

    @cached_property
    def compute(self) -> np.ndarray:
        return np.array([nd.compute for nd in self.nodes], dtype=float)

    @cached_property
    def memory(self) -> np.ndarray:
        return np.array([nd.memory for nd in self.nodes], dtype=float)

    @cached_property
    def op_type(self) -> np.ndarray:
        return np.array([nd.op_type for nd in self.nodes], dtype=int)

    @cached_property
    def edge_src(self) -> np.ndarray:
        return np.array([e.src for e in self.edges], dtype=int)

    @cached_property
    def edge_dst(self) -> np.ndarray:
        return np.array([e.dst for e in self.edges], dtype=int)

    @cached_property
    def edge_bytes(self) -> np.ndarray:
        return np.array([e.bytes for e in self.edges], dtype=float)

    @cached_property
    def in_degree(self) -> np.ndarray:
        return np.bincount(self.edge_dst, minlength=self.n).astype(float)

    @cached_property
    def out_degree(self) -> np.ndarray:
        return np.bincount(self.edge_src, minlength=self.n).astype(float)

    @cached_property
    def _adjacency(self) -> tuple[tuple[int, ...], ...]:
        nbrs: list[set[int]] = [set() for _ in range(self.n)]
        for e in self.edges:
            nbrs[e.src].add(e.dst)
            nbrs[e.dst].add(e.src)
        return tuple(tuple(sorted(s)) for s in nbrs)

    @cached_property
    def incident(self) -> tuple[tuple[int, ...], ...]:
        """Edge indices touching each node (in or out)."""
        inc: list[list[int]] = [[] for _ in range(self.n)]
        for k, e in enumerate(self.edges):
            inc[e.src].append(k)
            inc[e.dst].append(k)
        return tuple(tuple(x) for x in inc)

    @cached_property
    def mean_adjacency(self) -> np.ndarray:
        """Row-normalised undirected adjacency; rows of isolated nodes are 0."""
        a = np.zeros((self.n, self.n))
        for i, nb in enumerate(self._adjacency):
            if nb:
                a[i, list(nb)] = 1.0 / len(nb)
        return a


class Violation(NamedTuple):
    element: str  # "graph", "node" or "edge"
    index: int
    message: str

    def __str__(self):
        if self.element == "graph":
            return self.message
        return f"{self.element}[{self.index}]: {self.message}"


def _finite_nonneg(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x) and x >= 0


def validate_graph(g: Graph) -> list[Violation]:
    """Return every invariant violation; an empty list means ``g`` is valid."""
    out: list[Violation] = []
    n = len(g.nodes)
    if n < 1:
        out.append(Violation("graph", -1, "graph must have at least one node"))
    if not isinstance(g.op_types, int) or g.op_types < 1:
        out.append(Violation("graph", -1, f"op_types must be a positive integer, got {g.op_types!r}"))
    seen: set[int] = set()
    for k, nd in enumerate(g.nodes):
        if not isinstance(nd.id, int) or not 0 <= nd.id < n:
            out.append(Violation("node", k, f"id {nd.id!r} outside 0..{n - 1}"))
        elif nd.id in seen:
            out.append(Violation("node", k, f"duplicate id {nd.id}"))
        else:
            seen.add(nd.id)
        if not isinstance(nd.op_type, int) or not 0 <= nd.op_type < g.op_types:
            out.append(Violation("node", k, f"op {nd.op_type!r} outside 0..{g.op_types - 1}"))
        if not _finite_nonneg(nd.compute):
            out.append(Violation("node", k, f"compute {nd.compute!r} must be finite and >= 0"))
        if not _finite_nonneg(nd.memory):
            out.append(Violation("node", k, f"memory {nd.memory!r} must be finite and >= 0"))
    for k, e in enumerate(g.edges):
        for end in ("src", "dst"):
            v = getattr(e, end)
            if not isinstance(v, int) or not 0 <= v < n:
                out.append(Violation("edge", k, f"{end} {v!r} is not a node id (N={n})"))
        if e.src == e.dst:
            out.append(Violation("edge", k, f"self-loop on node {e.src}"))
        if not _finite_nonneg(e.bytes):
            out.append(Violation("edge", k, f"bytes {e.bytes!r} must be finite and >= 0"))
    return out


def check_graph(g: Graph) -> Graph:
    """Raise ValidationError on the first violation, else return ``g`` with nodes sorted by id."""
    violations = validate_graph(g)
    if violations:
        raise ValidationError(f"invalid graph: {violations[0]}", violations)
    if any(nd.id != k for k, nd in enumerate(g.nodes)):
        g = Graph(tuple(sorted(g.nodes, key=lambda nd: nd.id)), g.edges, g.kind, g.op_types)
    return g


def neighbors(g: Graph, i: int) -> list[int]:
    if not 0 <= i < g.n:
        raise IndexError(f"node {i} out of range for graph with {g.n} nodes")
    return list(g._adjacency[i])


def topological_order(g: Graph) -> list[int]:
    """Kahn's algorithm with a min-heap, so ties resolve to the smallest id."""
    indeg = [0] * g.n
    succ: list[list[int]] = [[] for _ in range(g.n)]
    for e in g.edges:
        succ[e.src].append(e.dst)
        indeg[e.dst] += 1
    ready = [i for i in range(g.n) if indeg[i] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        u = heapq.heappop(ready)
        order.append(u)
        for v in succ[u]:
            indeg[v] -= 1
            if indeg[v] == 0:
                heapq.heappush(ready, v)
    if len(order) != g.n:
        stuck = sorted(set(range(g.n)) - set(order))
        raise CycleError(f"graph has a cycle through nodes {stuck}")
    return order


# --- JSON -------------------------------------------------------------------

_TOP_KEYS = {"kind", "op_types", "nodes", "edges"}
_NODE_KEYS = {"id", "op", "compute", "memory"}
_EDGE_KEYS = {"src", "dst", "bytes"}


def _check_keys(obj, keys: set[str], where: str):
    if not isinstance(obj, dict):
        raise ParseError(f"{where}: expected an object, got {type(obj).__name__}")
    extra = sorted(set(obj) - keys)
    if extra:
        raise ParseError(f"{where}: unknown keys {extra}")
    missing = sorted(keys - set(obj))
    if missing:
        raise ParseError(f"{where}: missing keys {missing}")


def _int(v, where: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ParseError(f"{where}: expected an integer, got {v!r}")
    return v


def _num(v, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(f"{where}: expected a number, got {v!r}")
    return float(v)


def graph_from_dict(doc) -> Graph:
    """Parse the graph JSON document and validate it."""
    _check_keys(doc, _TOP_KEYS, "graph")
    try:
        kind = GraphKind(doc["kind"])
    except ValueError:
        raise ParseError(f"graph: kind must be 'device' or 'grid', got {doc['kind']!r}") from None
    op_types = _int(doc["op_types"], "graph.op_types")
    if not isinstance(doc["nodes"], list) or not isinstance(doc["edges"], list):
        raise ParseError("graph: nodes and edges must be arrays")
    nodes = []
    for k, nd in enumerate(doc["nodes"]):
        where = f"nodes[{k}]"
        _check_keys(nd, _NODE_KEYS, where)
        nodes.append(Node(_int(nd["id"], where + ".id"), _int(nd["op"], where + ".op"),
                          _num(nd["compute"], where + ".compute"), _num(nd["memory"], where + ".memory")))
    edges = []
    for k, e in enumerate(doc["edges"]):
        where = f"edges[{k}]"
        _check_keys(e, _EDGE_KEYS, where)
        edges.append(Edge(_int(e["src"], where + ".src"), _int(e["dst"], where + ".dst"),
                          _num(e["bytes"], where + ".bytes")))
    return check_graph(Graph(tuple(nodes), tuple(edges), kind, op_types))


def graph_to_dict(g: Graph) -> dict:
    return {
        "kind": g.kind.value,
        "op_types": g.op_types,
        "nodes": [{"id": nd.id, "op": nd.op_type, "compute": float(nd.compute), "memory": float(nd.memory)}
                  for nd in g.nodes],
        "edges": [{"src": e.src, "dst": e.dst, "bytes": float(e.bytes)} for e in g.edges],
    }


def load_graph(path) -> Graph:
    path = Path(path)
    text = path.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return graph_from_dict(doc)


def dumps_graph(g: Graph) -> str:
    return json.dumps(graph_to_dict(g), indent=1) + "\n"


def save_graph(g: Graph, path) -> None:
    Path(path).write_text(dumps_graph(g))


# --- synthetic graphs -------------------------------------------------------

@dataclass(frozen=True)
class GenParams:
    """Knobs for :func:`generate_synthetic`. Ranges are closed-open uniform draws."""

    kind: GraphKind = GraphKind.DEVICE
    op_types: int = 3
    compute_range: tuple[float, float] = (1.0, 10.0)
    memory_range: tuple[float, float] = (1.0, 10.0)
    bytes_range: tuple[float, float] = (1.0, 10.0)
    edge_prob: float = 0.3
    layers: int = 3


def _check_params(n: int, family: Family, p: GenParams):
    if n < 1:
        raise InvalidParams(f"n must be >= 1, got {n}")
    if p.op_types < 1:
        raise InvalidParams(f"op_types must be >= 1, got {p.op_types}")
    for name in ("compute_range", "memory_range", "bytes_range"):
        lo, hi = getattr(p, name)
        if not (0 <= lo <= hi) or not math.isfinite(hi):
            raise InvalidParams(f"{name} must satisfy 0 <= low <= high < inf, got {(lo, hi)}")
    if not 0.0 <= p.edge_prob <= 1.0:
        raise InvalidParams(f"edge_prob must lie in [0, 1], got {p.edge_prob}")
    if family is Family.LAYERED and not 1 <= p.layers <= n:
        raise InvalidParams(f"layered graph needs 1 <= layers <= n, got layers={p.layers}, n={n}")


def generate_synthetic(seed: int, n: int, family: Family | str = Family.RANDOM_DAG,
                       params: GenParams | None = None) -> Graph:
    """Deterministic synthetic graph. Every edge goes from a lower to a higher id."""
    family = Family(family)
    p = params or GenParams()
    _check_params(n, family, p)
    rng = np.random.default_rng(seed)
    ops = rng.integers(0, p.op_types, size=n)
    compute = rng.uniform(*p.compute_range, size=n)
    memory = rng.uniform(*p.memory_range, size=n)

    pairs: list[tuple[int, int]] = []
    if family is Family.CHAIN:
        pairs = [(i, i + 1) for i in range(n - 1)]
    elif family is Family.RANDOM_DAG:
        for i in range(n):
            for j in range(i + 1, n):
                if rng.random() < p.edge_prob:
                    pairs.append((i, j))
    else:
        layers = np.array_split(np.arange(n), p.layers)
        for below, above in zip(layers, layers[1:]):
            for v in above:
                picked = [int(u) for u in below if rng.random() < p.edge_prob]
                if not picked:
                    picked = [int(below[rng.integers(len(below))])]
                pairs.extend((u, int(v)) for u in picked)
        pairs.sort()
    nbytes = rng.uniform(*p.bytes_range, size=len(pairs))

    nodes = tuple(Node(i, int(ops[i]), float(compute[i]), float(memory[i])) for i in range(n))
    edges = tuple(Edge(u, v, float(b)) for (u, v), b in zip(pairs, nbytes))
    return Graph(nodes, edges, p.kind, p.op_types)
