from fractions import Fraction as F
from itertools import combinations

import numpy as np
import pytest

from ixpg.flow import (INF, FlowNetwork, UnboundedFlow, feasible_circulation, max_flow,
                       min_cut_side)


def net(nodes, edges, supplies=None):
    g = FlowNetwork()
    for v in nodes:
        g.add_node(v, (supplies or {}).get(v, 0))
    for u, v, c in edges:
        g.add_edge(u, v, c)
    return g


def test_single_edge():
    assert max_flow(net("st", [("s", "t", 5)]), "s", "t")[0] == 5


def test_diamond():
    g = net("sabt", [("s", "a", 3), ("s", "b", 2), ("a", "t", 2), ("b", "t", 3)])
    value, flows = max_flow(g, "s", "t")
    assert value == 4
    assert min_cut_side(g, "s", "t") in {frozenset("sa"), frozenset("sb"), frozenset("s"),
                                         frozenset("sab")}


def test_disconnected():
    assert max_flow(net("st", []), "s", "t")[0] == 0


def test_rejects_bad_input():
    g = FlowNetwork()
    g.add_node("a")
    with pytest.raises(ValueError):
        g.add_node("a")
    with pytest.raises(ValueError):
        g.add_edge("a", "b", 1)
    g.add_node("b")
    with pytest.raises(ValueError):
        g.add_edge("a", "b", -1)
    with pytest.raises(ValueError):
        max_flow(g, "a", "a")


def test_all_infinite_path_is_unbounded():
    with pytest.raises(UnboundedFlow):
        max_flow(net("sat", [("s", "a", INF), ("a", "t", INF)]), "s", "t")


def test_infinite_edge_inside_finite_cut():
    g = net("sat", [("s", "a", F(5, 2)), ("a", "t", INF)])
    assert max_flow(g, "s", "t")[0] == F(5, 2)


def cut_capacity(g, side):
    total = F(0)
    for u, v, c in g.edges:
        if u in side and v not in side:
            if c is INF:
                return None
            total += c
    return total


def brute_min_cut(g, s, t):
    others = [v for v in g.nodes if v not in (s, t)]
    best = None
    for r in range(len(others) + 1):
        for extra in combinations(others, r):
            c = cut_capacity(g, {s, *extra})
            if c is not None and (best is None or c < best):
                best = c
    return best


def check_flow(g, flows, s, t, value):
    assert len(flows) == len(g.edges)
    balance = {v: F(0) for v in g.nodes}
    for (u, v, c), f in zip(g.edges, flows):
        assert f >= 0
        assert c is INF or f <= c
        balance[u] -= f
        balance[v] += f
    for v in g.nodes:
        want = -value if v == s else value if v == t else 0
        assert balance[v] == want


def random_network(rng, size):
    nodes = list(range(size))
    edges = []
    for u in nodes:
        for v in nodes:
            if u != v and rng.random() < 0.35:
                if rng.random() < 0.15 and u != 0 and v != size - 1:
                    edges.append((u, v, INF))
                else:
                    edges.append((u, v, F(int(rng.integers(0, 12)), int(rng.integers(1, 4)))))
    return net(nodes, edges)


def test_max_flow_equals_enumerated_min_cut():
    rng = np.random.default_rng(31)
    checked = 0
    for _ in range(400):
        g = random_network(rng, int(rng.integers(2, 9)))
        s, t = 0, len(g.nodes) - 1
        best = brute_min_cut(g, s, t)
        if best is None:
            with pytest.raises(UnboundedFlow):
                max_flow(g, s, t)
            continue
        value, flows = max_flow(g, s, t)
        assert value == best
        check_flow(g, flows, s, t, value)
        assert cut_capacity(g, min_cut_side(g, s, t)) == value
        checked += 1
    assert checked > 300


def test_circulation_examples():
    ok = feasible_circulation(net("ab", [("a", "b", 1)], {"a": 1, "b": -1}))
    assert ok.feasible and ok.flows == [1]
    bad = feasible_circulation(net("ab", [("a", "b", F(1, 2))], {"a": 1, "b": -1}))
    assert not bad.feasible
    assert bad.cut == frozenset("b") and bad.shortfall == F(1, 2)


def test_circulation_needs_balanced_supplies():
    with pytest.raises(ValueError):
        feasible_circulation(net("ab", [("a", "b", 1)], {"a": 1}))


def test_circulation_cut_certifies_infeasibility():
    rng = np.random.default_rng(32)
    seen = {True: 0, False: 0}
    for _ in range(300):
        size = int(rng.integers(2, 7))
        raw = [F(int(v), 2) for v in rng.integers(-6, 7, size)]
        raw[-1] -= sum(raw)
        g = random_network(rng, size)
        for v, b in zip(g.nodes, raw):
            g.supplies[v] = b
        res = feasible_circulation(g)
        seen[res.feasible] += 1
        if res.feasible:
            balance = {v: g.supplies[v] for v in g.nodes}
            for (u, v, c), f in zip(g.edges, res.flows):
                assert 0 <= f and (c is INF or f <= c)
                balance[u] -= f
                balance[v] += f
            assert all(b == 0 for b in balance.values())
        else:
            b_cut = sum((g.supplies[v] for v in res.cut), F(0))
            inflow = F(0)
            for u, v, c in g.edges:
                if v in res.cut and u not in res.cut:
                    assert c is not INF
                    inflow += c
            assert b_cut + inflow < 0
    assert seen[True] > 20 and seen[False] > 20
