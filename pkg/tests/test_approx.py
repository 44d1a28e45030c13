import math
from fractions import Fraction as F

import numpy as np
import pytest

from instances import FRACTIONAL_LP, T1, T2, sample
from ixpg import oracle
from ixpg.approx import (LpSolution, build_relaxation, labeling_to_assignment, num_runs,
                         round_deterministic, round_randomized, sample_runs, single_projection,
                         solve_labeling_exhaustive, solve_relaxation, to_uniform_labeling)
from ixpg.lp import TOL, solve_lp
from ixpg.model import Instance, SizeCapExceeded, social_cost
from ixpg.multi import social_cost_multi


def integral_solution(inst, assignment):
    """LP point of a multi-mode assignment."""
    n, m = inst.n, inst.m
    x_ik = np.array([[1.0 if k in assignment[i] else 0.0 for k in range(m)] for i in range(n)])
    x_ijk = np.minimum(x_ik[:, None, :], x_ik[None, :, :])
    x_ijk[np.arange(n), np.arange(n)] = 0
    x_ij = np.maximum(0, 1 - x_ijk.sum(axis=2))
    np.fill_diagonal(x_ij, 0)
    return LpSolution(x_ik, x_ij, x_ijk, x_ik.max(axis=0), float(social_cost_multi(inst, assignment)))


def test_relaxation_examples():
    sol = solve_relaxation(T2)
    assert sol.objective == pytest.approx(0) and sol.violations() == []
    assert solve_relaxation(T1).objective <= 1.5 + 1e-9


def test_relaxation_shape():
    inst = sample(1, seed=61, n_range=(4, 4), m_range=(3, 3))[0]
    program, idx = build_relaxation(inst)
    pairs = 6
    assert idx.size == 4 * 3 + pairs + pairs * 3 + 3
    assert program.A.shape == (pairs * 3 * 2 + pairs + 4 * 3, idx.size)
    assert np.all(program.lb == 0) and np.all(program.ub == 1)


def test_relaxation_without_disconnection_is_facility_location():
    inst = Instance([[1, 4], [3, 1], [2, 2]], [[0] * 3] * 3, [3, 2])
    lp = solve_relaxation(inst).objective
    opt = oracle.brute_force_optimum(inst, "multi")[1]
    assert lp <= float(opt) + 1e-9


def test_lp_sandwich_against_brute_force():
    for inst in sample(60, seed=62, n_range=(2, 5), m_range=(1, 3), max_nm=12):
        sol = solve_relaxation(inst)
        assert sol.violations() == []
        opt = oracle.brute_force_optimum(inst, "multi")[1]
        assert sol.objective <= float(opt) + 1e-7
        det = round_deterministic(sol, inst)
        rnd = round_randomized(sol, inst, seed=7)
        for r in (det, rnd):
            assert r.violations() == []
            assert r.objective >= opt
            assert r.objective == social_cost_multi(inst, r.assignment)


def test_deterministic_examples():
    inst = sample(1, seed=63, n_range=(3, 3), m_range=(2, 2))[0]
    for a in [(frozenset([0]), frozenset([0, 1]), frozenset()),
              (frozenset(), frozenset(), frozenset([1]))]:
        sol = integral_solution(inst, a)
        r = round_deterministic(sol, inst)
        assert r.assignment == a and r.objective == social_cost_multi(inst, a)


def test_deterministic_threshold_boundary():
    inst = Instance([[1, 1], [1, 1]], [[0, 1], [1, 0]], [0, 0])
    third = 1 / 3
    x_ik = np.array([[third, 1 - third], [third - 1e-12, third - 1e-6]])
    sol = LpSolution(x_ik, np.zeros((2, 2)), np.zeros((2, 2, 2)), np.ones(2), 0.0)
    r = round_deterministic(sol, inst)
    # exactly 1/(m+1) rounds up, as does a float hair below; a real gap does not
    assert r.x_ik.tolist() == [[1, 1], [1, 0]]


def test_deterministic_per_variable_bound():
    for inst in sample(60, seed=64, n_range=(2, 6)):
        sol = solve_relaxation(inst)
        r = round_deterministic(sol, inst)
        f = inst.m + 1
        slack = 1e-6
        assert np.all(r.x_ik <= f * sol.x_ik + slack)
        assert np.all(r.x_k <= f * sol.x_k + slack)
        assert np.all(r.x_ijk <= f * sol.x_ijk + slack)
        off = ~np.eye(inst.n, dtype=bool)
        assert np.all(r.x_ij[off] <= f * sol.x_ij[off] + slack)
        assert float(r.objective) <= f * sol.objective * (1 + 1e-6) + 1e-9


def test_randomized_examples():
    inst = sample(1, seed=65, n_range=(4, 4), m_range=(3, 3))[0]
    a = (frozenset([0]), frozenset([0, 2]), frozenset(), frozenset([1]))
    for seed in range(5):
        assert round_randomized(integral_solution(inst, a), inst, seed).assignment == a


def test_randomized_is_reproducible():
    inst = sample(1, seed=66, n_range=(6, 6), m_range=(3, 3))[0]
    sol = solve_relaxation(inst)
    a = round_randomized(sol, inst, seed=3)
    b = round_randomized(sol, inst, seed=3)
    for name in ("x_ik", "x_ij", "x_ijk", "x_k"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    assert a.objective == b.objective and a.runs == num_runs(6)


def test_num_runs():
    assert num_runs(1) == math.ceil(4 * math.log(10))
    assert num_runs(8) == math.ceil(4 * math.log(80))


def test_staircase_joint_distribution():
    x = np.array([[0.2, 0.7], [0.5, 0.3], [0.9, 0.0]])
    runs = 200_000
    draws = sample_runs(x, np.random.default_rng(67), runs)
    freq = draws.mean(axis=0)
    se = np.sqrt(x * (1 - x) / runs)
    assert np.all(np.abs(freq - x) <= 4 * se + 1e-12)
    for i in range(3):
        for j in range(3):
            both = (draws[:, i] & draws[:, j]).mean(axis=0)
            want = np.minimum(x[i], x[j])
            assert np.all(np.abs(both - want) <= 4 * np.sqrt(want * (1 - want) / runs) + 1e-12)


def test_sampling_snaps_float_noise():
    x = np.array([[1 - TOL / 2, TOL / 2]])
    draws = sample_runs(x, np.random.default_rng(0), 1000)
    assert draws[:, 0, 0].all() and not draws[:, 0, 1].any()


def test_single_projection():
    inst = Instance([[3, 1, 2]], [[0]], [0, 0, 0])
    assert single_projection(inst, (frozenset([0, 2]),)) == (2,)
    assert single_projection(inst, (frozenset(),)) == (None,)


def test_labeling_examples():
    lab = to_uniform_labeling(T2)
    labeling, cost = solve_labeling_exhaustive(lab)
    assert cost == 0 and labeling_to_assignment(labeling, 1) == (0, 0)
    assert solve_labeling_exhaustive(to_uniform_labeling(T1))[1] == F(3, 2)
    assert lab.labels == ("f1", "p1", "p2")
    assert lab.separation[0][1] == 2


def test_labeling_rejects_facility_costs():
    with pytest.raises(ValueError):
        to_uniform_labeling(Instance([[0]], [[0]], [1]))


def test_labeling_cap():
    inst = Instance([[0] * 3] * 8, [[0 if i == j else 1 for j in range(8)] for i in range(8)], [0] * 3)
    with pytest.raises(SizeCapExceeded):
        solve_labeling_exhaustive(to_uniform_labeling(inst))


def test_labeling_optimum_equals_game_optimum():
    for inst in sample(60, seed=68, n_range=(1, 5)):
        inst = Instance(inst.cc, inst.dc, [0] * inst.m)
        labeling, cost = solve_labeling_exhaustive(to_uniform_labeling(inst))
        opt = oracle.brute_force_optimum(inst)[1]
        assert cost == opt
        assert social_cost(inst, labeling_to_assignment(labeling, inst.m)) == opt


def test_tightening_keeps_the_optimal_value():
    for inst in sample(40, seed=69, n_range=(2, 6)):
        program, _ = build_relaxation(inst)
        raw = solve_lp(program)
        sol = solve_relaxation(inst)
        assert sol.objective == pytest.approx(raw.objective, abs=1e-9)
        assert sol.violations() == []


def test_rounding_fractional_relaxations():
    for inst in FRACTIONAL_LP:
        sol = solve_relaxation(inst)
        assert np.any((sol.x_ik > 1e-6) & (sol.x_ik < 1 - 1e-6))
        opt = oracle.brute_force_optimum(inst, "multi")[1]
        assert sol.objective < float(opt) + 1e-7
        det = round_deterministic(sol, inst)
        assert det.violations() == [] and det.objective >= opt
        assert float(det.objective) <= (inst.m + 1) * sol.objective * (1 + 1e-6)
        for seed in range(5):
            rnd = round_randomized(sol, inst, seed)
            assert rnd.violations() == [] and rnd.objective >= opt
