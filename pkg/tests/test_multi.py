from fractions import Fraction as F
from itertools import combinations

import numpy as np
import pytest

from instances import M1, T1, T2, random_multi_assignment, sample
from ixpg import oracle
from ixpg.model import Instance, SizeCapExceeded, social_cost
from ixpg.multi import (MultiState, all_subsets, embed, is_alpha_stable_multi, is_stable_multi,
                        next_best_response_multi, peering_payments_multi, potential_multi,
                        q_matrix, q_value_multi, social_cost_multi, stabilize_multi, tc_multi,
                        tc_multi_at, valid_deviations)
from ixpg.payments import peering_payments

fs = frozenset


def test_tc_multi_examples():
    assert tc_multi(M1, (fs([0, 1]), fs([1])), 0) == 1
    assert tc_multi(M1, (fs([0]), fs([1])), 0) == 3
    lone = Instance([[4]], [[0]], [1])
    assert tc_multi(lone, (fs(),), 0) == 0


def test_valid_deviation_examples():
    assert set(valid_deviations(M1, (fs([0]), fs()), 0)) == {fs(), fs([0]), fs([1]), fs([0, 1])}
    assert set(valid_deviations(M1, (fs([0, 1]), fs()), 0)) == {fs([0]), fs([1]), fs([0, 1])}
    assert len(valid_deviations(M1, (fs(), fs()), 0)) == 4


def test_subset_cap():
    assert len(all_subsets(3)) == 8 and all_subsets(2)[0] == fs()
    with pytest.raises(SizeCapExceeded):
        all_subsets(13)


def test_q_value_multi_examples():
    s = (fs([0, 1]), fs([1]))
    assert q_value_multi(M1, s, 0, 1) == 2
    assert q_value_multi(M1, s, 0, 0) == 0
    single = Instance([[F(5, 2)]], [[0]], [0])
    assert q_value_multi(single, (fs([0]),), 0, 0) == F(-5, 2)
    with pytest.raises(ValueError):
        q_value_multi(M1, s, 1, 0)


def test_next_best_response_never_uses_closed_or_dropped_facility():
    inst = Instance([[0, 0, 0], [0, 0, 0]], [[0, 1], [1, 0]], [0, 0, 0])
    s = (fs([0]), fs([1]))
    x = next_best_response_multi(inst, s, 0, 0)
    assert x == fs([1])  # 2 is closed, 0 is the dropped facility


def test_stability_examples():
    zero = Instance([[0, 0], [0, 0]], [[0, 0], [0, 0]], [0, 0])
    for s in [(fs(), fs([1])), (fs([0, 1]), fs([0]))]:
        assert is_stable_multi(MultiState(zero, s)).stable
    s = (fs([0, 1]), fs([1]))
    cert = is_stable_multi(MultiState(M1, s, [[F(1, 2), 0], [0, 0]]))
    assert not cert.criterion[0] and not cert.literal[0]
    assert not cert.budget_balanced


def test_social_cost_multi_formula():
    inst = Instance([[1, 2], [3, 4], [5, 6]], [[0, 1, 2], [1, 0, 3], [2, 3, 0]], [7, 8])
    s = (fs([0]), fs([0, 1]), fs())
    # open 7 + 8, connection 1 + 3 + 4, disconnected pairs (0,2), (1,2)
    assert social_cost_multi(inst, s) == 15 + 8 + 2 * (2 + 3)


def test_embedding_matches_single_mode():
    rng = np.random.default_rng(71)
    for inst in sample(40, seed=71):
        s = tuple(None if d == 0 else int(d) - 1 for d in rng.integers(0, inst.m + 1, inst.n))
        assert social_cost_multi(inst, embed(s)) == social_cost(inst, s)


def test_multi_exact_potential():
    rng = np.random.default_rng(72)
    for inst in sample(60, seed=72, n_range=(2, 4)):
        s = random_multi_assignment(inst, rng)
        phi = potential_multi(inst, s)
        for i in range(inst.n):
            here = tc_multi(inst, s, i)
            for x in valid_deviations(inst, s, i):
                t = s[:i] + (x,) + s[i + 1:]
                assert tc_multi_at(inst, s, i, x) - here == potential_multi(inst, t) - phi


def test_brute_force_multi_optimum():
    s, cost = oracle.brute_force_optimum(M1, "multi")
    assert cost == 1 and s == (fs([1]), fs([1]))


def test_stabilize_multi_examples():
    s_star, opt = oracle.brute_force_optimum(M1, "multi")
    state, trace = stabilize_multi(M1, s_star)
    assert social_cost_multi(M1, state.assignment) <= 2 * opt
    assert is_stable_multi(state).stable
    state, _ = stabilize_multi(T2, embed((0, 0)))
    assert state.assignment == (fs([0]), fs([0])) and social_cost_multi(T2, state.assignment) == 0
    assert is_stable_multi(state).stable


def _check_multi_run(inst, start, alpha=1):
    state, trace = stabilize_multi(inst, start, alpha)
    assert trace.strictly_decreasing()
    if alpha == 1:
        cert = is_stable_multi(state)
        assert cert.stable and cert.consistent
    else:
        assert is_alpha_stable_multi(state, alpha).stable
    return state


def test_stabilize_multi_random():
    rng = np.random.default_rng(73)
    for inst in sample(80, seed=73, n_range=(2, 4)):
        s_star, opt = oracle.brute_force_optimum(inst, "multi")
        state = _check_multi_run(inst, s_star)
        assert social_cost_multi(inst, state.assignment) <= 2 * opt
        state = _check_multi_run(inst, s_star, F(2))
        assert social_cost_multi(inst, state.assignment) <= opt
        _check_multi_run(inst, None)
        _check_multi_run(inst, random_multi_assignment(inst, rng))


def test_criterion_is_sufficient_for_literal_stability():
    rng = np.random.default_rng(74)
    for inst in sample(80, seed=74, n_range=(2, 4)):
        s = random_multi_assignment(inst, rng)
        q = q_matrix(inst, s)
        prices = [[max(q[i][k], F(0)) * F(int(rng.integers(0, 3)), 2) for k in range(inst.m)]
                  for i in range(inst.n)]
        pay = [[F(int(rng.integers(0, 2)), 2) for _ in range(inst.m)] for _ in range(inst.n)]
        state = MultiState(inst, s, prices)
        assert is_stable_multi(state).consistent
        assert is_stable_multi(state, pay).consistent


def test_peering_multi_examples():
    s_star, _ = oracle.brute_force_optimum(M1, "multi")
    r = peering_payments_multi(M1, s_star)
    assert r.feasible and all(v == 0 for plane in r.p for row in plane for v in row)
    single = peering_payments(T1, (0, 0))
    r = peering_payments_multi(T1, embed((0, 0)))
    assert r.feasible
    assert r.p[0][0][1] == single.p[0][1] == F(1, 2)
    assert [row[0] for row in r.payments] == list(single.delta)
    lone = Instance([[0], [0]], [[0, 0], [0, 0]], [0])
    assert peering_payments_multi(lone, (fs([0]), fs())).feasible


def test_peering_multi_at_optimum_random():
    for inst in sample(80, seed=75, n_range=(2, 4)):
        s_star, _ = oracle.brute_force_optimum(inst, "multi")
        r = peering_payments_multi(inst, s_star)
        assert r.feasible
        cert = is_stable_multi(r.state, r.payments)
        assert cert.stable and cert.consistent and all(cert.criterion)
        for plane in r.p:
            for i, j in combinations(range(inst.n), 2):
                assert plane[i][j] == -plane[j][i] and abs(plane[i][j]) <= inst.dc[i][j]
