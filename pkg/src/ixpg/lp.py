"""Dense two-phase tableau simplex for small linear programs.

Minimizes ``c @ x`` subject to rows ``A[r] @ x (<=, >=, =) b[r]`` and
``lb <= x <= ub``.  Lower bounds are shifted away and finite upper bounds
become explicit rows.  Pricing is Dantzig's rule until a run of degenerate
pivots, then Bland's rule for the rest of the solve so cycling is
impossible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

TOL = 1e-9
DEGENERATE_STREAK = 50
MAX_PIVOTS = 100_000


@dataclass
class LinearProgram:
    c: np.ndarray
    A: np.ndarray
    senses: Sequence[str]
    b: np.ndarray
    lb: Optional[np.ndarray] = None
    ub: Optional[np.ndarray] = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        nv = self.c.shape[0]
        A = np.asarray(self.A, dtype=float)
        if A.size == 0:
            A = np.zeros((0, nv))
        if A.ndim != 2 or A.shape[1] != nv:
            raise ValueError(f"A must have {nv} columns, got shape {A.shape}")
        self.A = A
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        self.senses = list(self.senses)
        if self.A.shape[0] != self.b.shape[0] or len(self.senses) != self.b.shape[0]:
            raise ValueError("A, senses and b disagree on the number of rows")
        bad = [s for s in self.senses if s not in ("<=", ">=", "=")]
        if bad:
            raise ValueError(f"unknown constraint sense {bad[0]!r}")
        self.lb = np.zeros(nv) if self.lb is None else np.asarray(self.lb, dtype=float)
        self.ub = np.full(nv, np.inf) if self.ub is None else np.asarray(self.ub, dtype=float)
        if self.lb.shape != (nv,) or self.ub.shape != (nv,):
            raise ValueError("bounds must have one entry per variable")
        if not np.all(np.isfinite(self.lb)):
            raise ValueError("lower bounds must be finite")

    @property
    def num_vars(self) -> int:
        return self.c.shape[0]

    def residual(self, x) -> float:
        """Largest constraint or bound violation at ``x``."""
        x = np.asarray(x, dtype=float)
        worst = max(0.0, float(np.max(self.lb - x, initial=0)), float(np.max(x - self.ub, initial=0)))
        if self.A.shape[0]:
            ax = self.A @ x
            for r, s in enumerate(self.senses):
                d = ax[r] - self.b[r]
                v = d if s == "<=" else -d if s == ">=" else abs(d)
                worst = max(worst, v)
        return worst


@dataclass
class LpResult:
    status: str  # "optimal", "infeasible" or "unbounded"
    x: Optional[np.ndarray]
    objective: Optional[float]
    pivots: int = 0


class _Tableau:
    def __init__(self, T, basis):
        self.T = T
        self.basis = basis
        self.bland = False
        self.streak = 0
        self.pivots = 0

    def pivot(self, r, j):
        T = self.T
        T[r] /= T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        self.basis[r] = j
        self.pivots += 1

    def run(self, ncols: int) -> str:
        T = self.T
        while True:
            if self.pivots > MAX_PIVOTS:
                raise RuntimeError("simplex pivot limit reached")
            red = T[-1, :ncols]
            if self.bland:
                neg = np.flatnonzero(red < -TOL)
                if not len(neg):
                    return "optimal"
                j = int(neg[0])
            else:
                j = int(np.argmin(red))
                if red[j] >= -TOL:
                    return "optimal"
            col = T[:-1, j]
            rows = np.flatnonzero(col > TOL)
            if not len(rows):
                return "unbounded"
            ratios = T[rows, -1] / col[rows]
            best = ratios.min()
            ties = rows[ratios <= best + TOL]
            r = int(min(ties, key=lambda t: self.basis[t]))
            if best <= TOL:
                self.streak += 1
                if self.streak >= DEGENERATE_STREAK:
                    self.bland = True
            else:
                self.streak = 0
            self.pivot(r, j)


def solve_lp(program: LinearProgram) -> LpResult:
    nv = program.num_vars
    lb, ub = program.lb, program.ub
    if np.any(ub < lb - TOL):
        return LpResult("infeasible", None, None)
    # x = lb + y, y >= 0
    rows_A, rows_b, senses = [], [], []
    for r in range(program.A.shape[0]):
        rows_A.append(program.A[r])
        rows_b.append(program.b[r] - program.A[r] @ lb)
        senses.append(program.senses[r])
    for j in np.flatnonzero(np.isfinite(ub)):
        e = np.zeros(nv)
        e[j] = 1.0
        rows_A.append(e)
        rows_b.append(ub[j] - lb[j])
        senses.append("<=")
    m = len(rows_A)
    A = np.array(rows_A).reshape(m, nv)
    b = np.array(rows_b, dtype=float)

    slack_of = {}
    ns = 0
    for i, s in enumerate(senses):
        if s != "=":
            slack_of[i] = ns
            ns += 1
    sign = np.where(b < 0, -1.0, 1.0)
    need_art = []
    for i, s in enumerate(senses):
        coeff = {"<=": 1.0, ">=": -1.0}.get(s)
        if coeff is None or coeff * sign[i] < 0:
            need_art.append(i)
    na = len(need_art)
    ncols = nv + ns + na
    T = np.zeros((m + 1, ncols + 1))
    basis = [0] * m
    for i, s in enumerate(senses):
        T[i, :nv] = A[i] * sign[i]
        T[i, -1] = b[i] * sign[i]
        if s != "=":
            T[i, nv + slack_of[i]] = (1.0 if s == "<=" else -1.0) * sign[i]
    for a, i in enumerate(need_art):
        T[i, nv + ns + a] = 1.0
        basis[i] = nv + ns + a
    for i in range(m):
        if i not in need_art:
            basis[i] = nv + slack_of[i]

    tab = _Tableau(T, basis)
    if na:
        # phase one: minimize the sum of artificials
        T[-1, :] = 0.0
        for i in need_art:
            T[-1] -= T[i]
        T[-1, nv + ns:ncols] = 0.0
        tab.run(ncols)
        if -T[-1, -1] > TOL * max(1.0, float(np.abs(b).max(initial=0))):
            return LpResult("infeasible", None, None, tab.pivots)
        art = set(range(nv + ns, ncols))
        keep = []
        for r in range(m):
            if tab.basis[r] in art:
                cand = np.flatnonzero(np.abs(T[r, :nv + ns]) > TOL)
                if len(cand):
                    tab.pivot(r, int(cand[0]))
                    keep.append(r)
                # otherwise the row is redundant and dropped
            else:
                keep.append(r)
        T = np.vstack([T[keep][:, list(range(nv + ns)) + [ncols]], np.zeros((1, nv + ns + 1))])
        done = tab.pivots
        tab = _Tableau(T, [tab.basis[r] for r in keep])
        tab.pivots = done
        ncols = nv + ns
        m = len(keep)
    cost = np.concatenate([program.c, np.zeros(ncols - nv)])
    T[-1, :ncols] = cost
    T[-1, -1] = 0.0
    for r in range(m):
        T[-1] -= cost[tab.basis[r]] * T[r]
    tab.bland = False
    tab.streak = 0
    status = tab.run(ncols)
    if status == "unbounded":
        return LpResult("unbounded", None, None, tab.pivots)
    y = np.zeros(ncols)
    for r in range(m):
        y[tab.basis[r]] = T[r, -1]
    x = lb + y[:nv]
    x = np.clip(x, lb, ub)
    return LpResult("optimal", x, float(program.c @ x), tab.pivots)
