from itertools import combinations

import numpy as np
import pytest
from scipy.optimize import linprog

from ixpg.lp import TOL, LinearProgram, solve_lp


def test_single_variable():
    r = solve_lp(LinearProgram([1], [[1]], [">="], [3], [0], [10]))
    assert r.status == "optimal" and r.x[0] == pytest.approx(3) and r.objective == pytest.approx(3)


def test_symmetric_pair():
    r = solve_lp(LinearProgram([1, 1], [[1, 1]], [">="], [1], [0, 0], [1, 1]))
    assert r.status == "optimal" and r.objective == pytest.approx(1)


def test_no_constraints():
    r = solve_lp(LinearProgram([1, -2], np.zeros((0, 2)), [], [], [0, 0], [3, 4]))
    assert r.objective == pytest.approx(-8)


def test_infeasible():
    r = solve_lp(LinearProgram([1], [[1]], [">="], [5], [0], [1]))
    assert r.status == "infeasible"
    r = solve_lp(LinearProgram([0, 0], [[1, 1], [1, 1]], ["<=", ">="], [1, 2], [0, 0], [5, 5]))
    assert r.status == "infeasible"
    r = solve_lp(LinearProgram([1], np.zeros((0, 1)), [], [], [2], [1]))
    assert r.status == "infeasible"


def test_unbounded():
    r = solve_lp(LinearProgram([-1, 0], [[1, -1]], ["<="], [1]))
    assert r.status == "unbounded"


def test_equalities_and_shifted_bounds():
    # min x - y, x + y = 3, x in [1, 2], y in [-1, 5]
    r = solve_lp(LinearProgram([1, -1], [[1, 1]], ["="], [3], [1, -1], [2, 5]))
    assert r.status == "optimal"
    assert r.x == pytest.approx([1, 2]) and r.objective == pytest.approx(-1)


@pytest.mark.parametrize("kwargs", [
    dict(c=[1, 2], A=[[1, 2, 3]], senses=["<="], b=[1]),
    dict(c=[1, 2], A=[[1, 2]], senses=["<=", "<="], b=[1]),
    dict(c=[1, 2], A=[[1, 2]], senses=["<"], b=[1]),
    dict(c=[1, 2], A=[[1, 2]], senses=["<="], b=[1], lb=[0]),
    dict(c=[1], A=[[1]], senses=["<="], b=[1], lb=[-np.inf]),
])
def test_dimension_mismatch(kwargs):
    with pytest.raises(ValueError):
        LinearProgram(**kwargs)


def test_beale_cycling_example():
    # Dantzig's rule cycles on this degenerate program without an anti-cycling rule
    c = [-0.75, 150, -0.02, 6]
    A = [[0.25, -60, -0.04, 9], [0.5, -90, -0.02, 3], [0, 0, 1, 0]]
    r = solve_lp(LinearProgram(c, A, ["<="] * 3, [0, 0, 1]))
    assert r.status == "optimal"
    assert r.objective == pytest.approx(-0.05)


def vertex_optimum(lp):
    """Best vertex of {Ax (sense) b, lb <= x <= ub} by solving every square
    subsystem of tight constraints."""
    n = lp.num_vars
    rows, rhs = [], []
    for a, s, b in zip(lp.A, lp.senses, lp.b):
        rows.append(a)
        rhs.append(b)
    eye = np.eye(n)
    for j in range(n):
        rows.append(eye[j]); rhs.append(lp.lb[j])
        rows.append(eye[j]); rhs.append(lp.ub[j])
    rows, rhs = np.array(rows), np.array(rhs)
    best = None
    for pick in combinations(range(len(rows)), n):
        m = rows[list(pick)]
        if abs(np.linalg.det(m)) < 1e-12:
            continue
        x = np.linalg.solve(m, rhs[list(pick)])
        if lp.residual(x) <= 1e-9:
            v = float(lp.c @ x)
            best = v if best is None else min(best, v)
    return best


def random_lp(rng, nv, nc):
    c = rng.integers(-5, 6, nv).astype(float)
    A = rng.integers(-4, 5, (nc, nv)).astype(float)
    senses = list(rng.choice(["<=", ">=", "="], nc, p=[0.45, 0.45, 0.1]))
    x0 = rng.integers(0, 3, nv).astype(float)  # keeps many programs feasible
    b = A @ x0 + np.where(np.array(senses) == "<=", 1.0, np.where(np.array(senses) == ">=", -1.0, 0.0))
    b += rng.integers(-2, 3, nc) * (rng.random(nc) < 0.3)
    lb = rng.integers(-1, 1, nv).astype(float)
    ub = lb + rng.integers(1, 5, nv)
    return LinearProgram(c, A, senses, b, lb, ub)


def test_matches_vertex_enumeration():
    rng = np.random.default_rng(51)
    statuses = set()
    for _ in range(300):
        lp = random_lp(rng, int(rng.integers(1, 7)), int(rng.integers(0, 7)))
        r = solve_lp(lp)
        best = vertex_optimum(lp)
        statuses.add(r.status)
        if best is None:
            assert r.status == "infeasible"
            continue
        assert r.status == "optimal"
        assert lp.residual(r.x) <= TOL
        assert r.objective == pytest.approx(best, abs=1e-9)
        assert r.objective == pytest.approx(float(lp.c @ r.x), abs=1e-9)
    assert statuses == {"optimal", "infeasible"}


def test_matches_scipy_on_larger_programs():
    rng = np.random.default_rng(52)
    for _ in range(60):
        nv, nc = int(rng.integers(5, 40)), int(rng.integers(3, 30))
        lp = random_lp(rng, nv, nc)
        r = solve_lp(lp)
        ub = [(row, b) if s == "<=" else (-row, -b) for row, s, b in zip(lp.A, lp.senses, lp.b)
              if s != "="]
        eq = [(row, b) for row, s, b in zip(lp.A, lp.senses, lp.b) if s == "="]
        ref = linprog(lp.c,
                      A_ub=np.array([u[0] for u in ub]) if ub else None,
                      b_ub=np.array([u[1] for u in ub]) if ub else None,
                      A_eq=np.array([e[0] for e in eq]) if eq else None,
                      b_eq=np.array([e[1] for e in eq]) if eq else None,
                      bounds=list(zip(lp.lb, lp.ub)), method="highs")
        if ref.status == 2:
            assert r.status == "infeasible"
            continue
        assert ref.status == 0
        assert r.status == "optimal"
        assert lp.residual(r.x) <= TOL
        assert r.objective == pytest.approx(ref.fun, abs=1e-7)
