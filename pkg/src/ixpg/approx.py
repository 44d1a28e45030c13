"""LP relaxation of the social optimum and two rounding schemes.

Variables, all in [0, 1]: ``x_ik`` (agent i uses facility k), ``x_ij`` for
unordered pairs (i and j share no facility), ``x_ijk`` (i and j share k) and
``x_k`` (k is open).  Rounded solutions are reported in multi-facility form.
Also here: the reduction to uniform labeling for zero facility costs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

import numpy as np

from .lp import TOL, LinearProgram, solve_lp
from .model import Instance, SizeCapExceeded


@dataclass(frozen=True)
class VarIndex:
    n: int
    m: int

    @property
    def pairs(self) -> list:
        return list(combinations(range(self.n), 2))

    def ik(self, i, k):
        return i * self.m + k

    def ij(self, p):
        return self.n * self.m + p

    def ijk(self, p, k):
        return self.n * self.m + len(self.pairs) + p * self.m + k

    def k(self, k):
        return self.n * self.m + len(self.pairs) * (1 + self.m) + k

    @property
    def size(self) -> int:
        return self.k(self.m)


def build_relaxation(instance: Instance):
    """Return ``(LinearProgram, VarIndex)`` for the relaxed optimum."""
    n, m = instance.n, instance.m
    idx = VarIndex(n, m)
    pairs = idx.pairs
    c = np.zeros(idx.size)
    for i in range(n):
        for k in range(m):
            c[idx.ik(i, k)] = float(instance.cc[i][k])
    for p, (i, j) in enumerate(pairs):
        c[idx.ij(p)] = 2 * float(instance.dc[i][j])
    for k in range(m):
        c[idx.k(k)] = float(instance.fcost[k])
    rows, senses, rhs = [], [], []

    def row(entries, sense, b):
        r = np.zeros(idx.size)
        for v, coef in entries:
            r[v] += coef
        rows.append(r)
        senses.append(sense)
        rhs.append(b)

    for p, (i, j) in enumerate(pairs):
        for k in range(m):
            row([(idx.ijk(p, k), 1), (idx.ik(i, k), -1)], "<=", 0)
            row([(idx.ijk(p, k), 1), (idx.ik(j, k), -1)], "<=", 0)
        row([(idx.ij(p), 1)] + [(idx.ijk(p, k), 1) for k in range(m)], ">=", 1)
    for i in range(n):
        for k in range(m):
            row([(idx.k(k), 1), (idx.ik(i, k), -1)], ">=", 0)
    A = np.array(rows) if rows else np.zeros((0, idx.size))
    program = LinearProgram(c, A, senses, rhs, np.zeros(idx.size), np.ones(idx.size))
    return program, idx


@dataclass(frozen=True)
class LpSolution:
    x_ik: np.ndarray  # n x m
    x_ij: np.ndarray  # n x n symmetric, zero diagonal
    x_ijk: np.ndarray  # n x n x m symmetric in (i, j)
    x_k: np.ndarray  # m
    objective: float

    @classmethod
    def from_vector(cls, x, idx: VarIndex, objective: float):
        n, m = idx.n, idx.m
        x_ik = np.array([[x[idx.ik(i, k)] for k in range(m)] for i in range(n)], dtype=float)
        x_ij = np.zeros((n, n))
        x_ijk = np.zeros((n, n, m))
        for p, (i, j) in enumerate(idx.pairs):
            x_ij[i, j] = x_ij[j, i] = x[idx.ij(p)]
            for k in range(m):
                x_ijk[i, j, k] = x_ijk[j, i, k] = x[idx.ijk(p, k)]
        x_k = np.array([x[idx.k(k)] for k in range(m)], dtype=float)
        return cls(x_ik, x_ij, x_ijk, x_k, objective)

    def violations(self, tol: float = 1e-9) -> list:
        n = self.x_ik.shape[0]
        out = []
        for i, j in combinations(range(n), 2):
            if np.any(self.x_ijk[i, j] > np.minimum(self.x_ik[i], self.x_ik[j]) + tol):
                out.append(f"shared-use bound broken for ({i},{j})")
            if 1 - self.x_ij[i, j] > self.x_ijk[i, j].sum() + tol:
                out.append(f"disconnection bound broken for ({i},{j})")
        if np.any(self.x_ik > self.x_k[None, :] + tol):
            out.append("facility open bound broken")
        return out


def _tighten(x: np.ndarray, idx: VarIndex) -> np.ndarray:
    """Push the free variables to their tightest values.

    Shared use becomes ``min(x_ik, x_jk)``, disconnection ``1 - sum_k x_ijk``
    (floored at 0) and openness ``max_i x_ik``.  Feasibility is kept and the
    objective cannot rise, so an optimal point stays optimal.
    """
    x = np.clip(np.asarray(x, dtype=float).copy(), 0.0, 1.0)
    n, m = idx.n, idx.m
    xik = x[: n * m].reshape(n, m)
    for p, (i, j) in enumerate(idx.pairs):
        shared = np.minimum(xik[i], xik[j])
        for k in range(m):
            x[idx.ijk(p, k)] = shared[k]
        x[idx.ij(p)] = max(0.0, 1.0 - float(shared.sum()))
    for k in range(m):
        x[idx.k(k)] = float(xik[:, k].max()) if n else 0.0
    return x


def solve_relaxation(instance: Instance) -> LpSolution:
    program, idx = build_relaxation(instance)
    res = solve_lp(program)
    if res.status != "optimal":
        raise RuntimeError(f"relaxation solve ended {res.status}")
    x = _tighten(res.x, idx)
    return LpSolution.from_vector(x, idx, float(program.c @ x))


@dataclass(frozen=True)
class Rounded:
    """A 0/1 solution of the integer program."""

    x_ik: np.ndarray
    x_ij: np.ndarray
    x_ijk: np.ndarray
    x_k: np.ndarray
    objective: Fraction  # exact integer-program objective
    runs: int = 0
    seed: object = None

    @property
    def assignment(self) -> tuple:
        return tuple(frozenset(int(k) for k in np.flatnonzero(row)) for row in self.x_ik)

    def violations(self) -> list:
        out = []
        for name in ("x_ik", "x_ij", "x_ijk", "x_k"):
            a = getattr(self, name)
            if not np.all((a == 0) | (a == 1)):
                out.append(f"{name} is not integral")
        n = self.x_ik.shape[0]
        for i, j in combinations(range(n), 2):
            if np.any(self.x_ijk[i, j] > np.minimum(self.x_ik[i], self.x_ik[j])):
                out.append(f"shared-use bound broken for ({i},{j})")
            if 1 - self.x_ij[i, j] > self.x_ijk[i, j].sum():
                out.append(f"disconnection bound broken for ({i},{j})")
        if np.any(self.x_ik > self.x_k[None, :]):
            out.append("facility open bound broken")
        return out


def ip_objective(instance: Instance, x_ik, x_ij, x_k) -> Fraction:
    n, m = instance.n, instance.m
    total = Fraction(0)
    for i in range(n):
        for k in range(m):
            if x_ik[i, k]:
                total += instance.cc[i][k]
    for i, j in combinations(range(n), 2):
        if x_ij[i, j]:
            total += 2 * instance.dc[i][j]
    for k in range(m):
        if x_k[k]:
            total += instance.fcost[k]
    return total


def complete(instance: Instance, x_ik: np.ndarray, x_ij=None, runs=0, seed=None) -> Rounded:
    """Fill in shared-use, disconnection and open variables from ``x_ik``."""
    x_ik = x_ik.astype(np.int64)
    x_ijk = np.minimum(x_ik[:, None, :], x_ik[None, :, :])
    n = x_ik.shape[0]
    x_ijk[np.arange(n), np.arange(n), :] = 0
    if x_ij is None:
        x_ij = np.maximum(0, 1 - x_ijk.sum(axis=2))
    x_ij = x_ij.astype(np.int64)
    np.fill_diagonal(x_ij, 0)
    x_k = x_ik.max(axis=0) if n else np.zeros(instance.m, dtype=np.int64)
    obj = ip_objective(instance, x_ik, x_ij, x_k)
    return Rounded(x_ik, x_ij, x_ijk, x_k, obj, runs, seed)


def round_deterministic(solution: LpSolution, instance: Instance) -> Rounded:
    """Open ``x_ik`` whenever the fractional value reaches ``1 / (m + 1)``."""
    threshold = 1.0 / (instance.m + 1) - TOL
    return complete(instance, solution.x_ik >= threshold)


def num_runs(n: int) -> int:
    return math.ceil(4 * math.log(10 * n))


def _snap(x: np.ndarray) -> np.ndarray:
    x = np.where(x <= TOL, 0.0, x)
    return np.where(x >= 1 - TOL, 1.0, x)


def sample_runs(x_ik: np.ndarray, rng: np.random.Generator, runs: int) -> np.ndarray:
    """Correlated per-facility rounding, ``runs`` times.

    One uniform threshold per facility and run: agent i takes facility k iff
    the threshold is below ``x_ik``.  Each agent's marginal equals its value
    and two agents share k with probability equal to the smaller value.
    """
    x = _snap(np.asarray(x_ik, dtype=float))
    u = rng.random((runs, x.shape[1]))
    return u[:, None, :] < x[None, :, :]


def round_randomized(solution: LpSolution, instance: Instance, seed, runs=None) -> Rounded:
    """Union of ``ceil(4 ln 10n)`` correlated roundings.

    A pair counts as disconnected only if it was disconnected in every run.
    """
    t = num_runs(instance.n) if runs is None else runs
    rng = np.random.default_rng(seed)
    draws = sample_runs(solution.x_ik, rng, t).astype(np.int64)  # t x n x m
    shared = np.minimum(draws[:, :, None, :], draws[:, None, :, :]).sum(axis=3)  # t x n x n
    apart = (shared == 0).all(axis=0)
    x_ik = draws.max(axis=0)
    return complete(instance, x_ik, apart, t, seed)


def single_projection(instance: Instance, assignment) -> tuple:
    """Lossy view: keep only the cheapest facility each agent uses."""
    out = []
    for i, fs in enumerate(assignment):
        if not fs:
            out.append(None)
        else:
            out.append(min(sorted(fs), key=lambda k: instance.cc[i][k]))
    return tuple(out)


# ---- uniform labeling ------------------------------------------------------

@dataclass(frozen=True)
class LabelingInstance:
    labels: tuple  # ("f1", ..., "p1", ...)
    label_cost: tuple  # n x L
    separation: tuple  # n x n, paid once per unordered pair with different labels
    big: Fraction

    @property
    def n(self) -> int:
        return len(self.label_cost)

    def cost(self, labeling) -> Fraction:
        total = sum((self.label_cost[i][l] for i, l in enumerate(labeling)), Fraction(0))
        for i, j in combinations(range(self.n), 2):
            if labeling[i] != labeling[j]:
                total += self.separation[i][j]
        return total

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "label_cost": [[str(v) for v in row] for row in self.label_cost],
            "separation": [[str(v) for v in row] for row in self.separation],
            "big": str(self.big),
        }


def to_uniform_labeling(instance: Instance) -> LabelingInstance:
    """One label per facility plus one personal label per agent.

    An agent on its personal label joins nothing.  Everyone else pays a
    prohibitive cost for that label, so no two agents share it.
    """
    if any(c != 0 for c in instance.fcost):
        raise ValueError("uniform labeling needs all facility costs to be zero")
    n, m = instance.n, instance.m
    big = 1 + sum((v for row in instance.cc for v in row), Fraction(0)) \
        + sum((v for row in instance.dc for v in row), Fraction(0))
    labels = tuple(f"f{k + 1}" for k in range(m)) + tuple(f"p{i + 1}" for i in range(n))
    cost = []
    for i in range(n):
        row = list(instance.cc[i]) + [Fraction(0) if j == i else big for j in range(n)]
        cost.append(tuple(row))
    sep = tuple(tuple(2 * instance.dc[i][j] for j in range(n)) for i in range(n))
    return LabelingInstance(labels, tuple(cost), sep, big)


def labeling_to_assignment(labeling, m: int) -> tuple:
    return tuple(l if l < m else None for l in labeling)


def solve_labeling_exhaustive(lab: LabelingInstance, limit: int = 10 ** 6):
    """Exact optimum labeling by enumeration, returned as ``(labeling, cost)``."""
    n, L = lab.n, len(lab.labels)
    if L ** n > limit:
        raise SizeCapExceeded(f"{L ** n} labelings exceed the limit {limit}")
    scale = 1
    for v in [*(x for r in lab.label_cost for x in r), *(x for r in lab.separation for x in r)]:
        scale = math.lcm(scale, v.denominator)
    lc = np.array([[int(v * scale) for v in r] for r in lab.label_cost], dtype=object)
    sp = np.array([[int(v * scale) for v in r] for r in lab.separation], dtype=object)
    codes = np.arange(L ** n, dtype=np.int64)
    digits = np.empty((len(codes), n), dtype=np.int64)
    rest = codes.copy()
    for pos in range(n - 1, -1, -1):
        digits[:, pos] = rest % L
        rest //= L
    total = np.zeros(len(codes), dtype=object)
    for i in range(n):
        total = total + lc[i][digits[:, i]]
    for i, j in combinations(range(n), 2):
        if sp[i, j]:
            total = total + sp[i, j] * (digits[:, i] != digits[:, j])
    r = int(np.argmin(total))
    best, best_cost = tuple(int(d) for d in digits[r]), Fraction(int(total[r]), scale)
    return best, best_cost
