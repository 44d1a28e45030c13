"""Exact max-flow (Edmonds-Karp) and supply/demand circulation feasibility.

Capacities are Fractions or the :data:`INF` marker.  Infinite capacity is
never emulated with a big number.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Hashable, Optional


class _Infinity:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INF"

    def __reduce__(self):
        return (_Infinity, ())


INF = _Infinity()


class UnboundedFlow(ValueError):
    """Raised when an all-infinite augmenting path exists."""


@dataclass
class FlowNetwork:
    nodes: list = field(default_factory=list)
    edges: list = field(default_factory=list)  # (u, v, capacity)
    supplies: dict = field(default_factory=dict)

    def add_node(self, v: Hashable, supply=0):
        if v in self.supplies:
            raise ValueError(f"duplicate node {v!r}")
        self.nodes.append(v)
        self.supplies[v] = Fraction(supply)

    def add_edge(self, u, v, capacity) -> int:
        if u not in self.supplies or v not in self.supplies:
            raise ValueError("edge endpoints must be nodes")
        if capacity is not INF:
            capacity = Fraction(capacity)
            if capacity < 0:
                raise ValueError("capacities must be nonnegative")
        self.edges.append((u, v, capacity))
        return len(self.edges) - 1


def _edmonds_karp(n: int, arcs: list, s: int, t: int):
    """``arcs`` is a list of (u, v, cap-or-None).  Returns (value, flows, reachable)."""
    graph = [[] for _ in range(n)]
    # residual edge r: to, cap (None = infinite), partner index
    to, cap, rev = [], [], []
    for u, v, c in arcs:
        graph[u].append(len(to)); to.append(v); cap.append(c); rev.append(len(to))
        graph[v].append(len(to)); to.append(u); cap.append(Fraction(0)); rev.append(len(to) - 2)

    def residual(r):
        return cap[r] is None or cap[r] > 0

    value = Fraction(0)
    while True:
        pred = [-1] * n
        pred[s] = -2
        queue = deque([s])
        while queue and pred[t] == -1:
            u = queue.popleft()
            for r in graph[u]:
                v = to[r]
                if pred[v] == -1 and residual(r):
                    pred[v] = r
                    queue.append(v)
        if pred[t] == -1:
            break
        bottleneck = None
        v = t
        while v != s:
            r = pred[v]
            if cap[r] is not None and (bottleneck is None or cap[r] < bottleneck):
                bottleneck = cap[r]
            v = to[rev[r]]
        if bottleneck is None:
            raise UnboundedFlow("source and sink joined by an infinite path")
        v = t
        while v != s:
            r = pred[v]
            if cap[r] is not None:
                cap[r] -= bottleneck
            if cap[rev[r]] is not None:
                cap[rev[r]] += bottleneck
            v = to[rev[r]]
        value += bottleneck

    reach = [False] * n
    reach[s] = True
    queue = deque([s])
    while queue:
        u = queue.popleft()
        for r in graph[u]:
            if not reach[to[r]] and residual(r):
                reach[to[r]] = True
                queue.append(to[r])
    # flow on an original arc equals the residual capacity of its reverse arc
    flows = [cap[2 * e + 1] for e in range(len(arcs))]
    return value, flows, reach


def _index(network: FlowNetwork):
    return {v: i for i, v in enumerate(network.nodes)}


def _arcs(network: FlowNetwork, idx: dict) -> list:
    return [(idx[u], idx[v], None if c is INF else c) for u, v, c in network.edges]


def max_flow(network: FlowNetwork, source, sink):
    """Maximum ``source``-``sink`` flow.  Returns ``(value, flows)`` with one
    flow per edge in ``network.edges`` order."""
    if source == sink:
        raise ValueError("source and sink must differ")
    idx = _index(network)
    value, flows, _ = _edmonds_karp(len(idx), _arcs(network, idx), idx[source], idx[sink])
    return value, flows


def min_cut_side(network: FlowNetwork, source, sink) -> frozenset:
    """Source side of a minimum cut (nodes reachable in the final residual)."""
    idx = _index(network)
    _, _, reach = _edmonds_karp(len(idx), _arcs(network, idx), idx[source], idx[sink])
    return frozenset(v for v in network.nodes if reach[idx[v]])


@dataclass(frozen=True)
class CirculationResult:
    feasible: bool
    flows: Optional[list]
    cut: Optional[frozenset]  # nodes whose demand cannot be met from outside
    shortfall: Fraction = Fraction(0)


def feasible_circulation(network: FlowNetwork) -> CirculationResult:
    """Decide whether flows exist meeting every node's supply exactly.

    Positive supply means the node emits that much net flow.  On failure the
    returned ``cut`` is a node set ``B`` whose total supply is below minus the
    capacity entering it.
    """
    total = sum(network.supplies.values(), Fraction(0))
    if total != 0:
        raise ValueError(f"supplies sum to {total}, not 0")
    idx = _index(network)
    n = len(idx)
    src, snk = n, n + 1
    arcs = _arcs(network, idx)
    need = Fraction(0)
    for v in network.nodes:
        b = network.supplies[v]
        if b > 0:
            arcs.append((src, idx[v], b))
            need += b
        elif b < 0:
            arcs.append((idx[v], snk, -b))
    value, flows, reach = _edmonds_karp(n + 2, arcs, src, snk)
    if value == need:
        return CirculationResult(True, flows[:len(network.edges)], None)
    cut = frozenset(v for v in network.nodes if not reach[idx[v]])
    return CirculationResult(False, None, cut, need - value)
