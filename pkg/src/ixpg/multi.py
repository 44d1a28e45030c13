"""Multi-facility mode: each agent uses a set of facilities.

A deviation may join any number of facilities but leave at most one.  Prices
and payments are per agent and facility.  Strategies are frozensets of
facility indices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Optional, Sequence

from .dynamics import Step, Trace
from .flow import feasible_circulation
from .model import Instance, SizeCapExceeded, check_alpha, to_rat

MAX_FACILITIES = 12


def check_multi(instance: Instance, assignment) -> tuple:
    s = tuple(frozenset(x) for x in assignment)
    if len(s) != instance.n:
        raise ValueError(f"assignment has {len(s)} entries, expected {instance.n}")
    for x in s:
        for k in x:
            if not (isinstance(k, int) and 0 <= k < instance.m):
                raise ValueError(f"invalid facility {k!r}")
    return s


def embed(assignment) -> tuple:
    """Single-mode assignment as a multi-mode one."""
    return tuple(frozenset() if x is None else frozenset([x]) for x in assignment)


def open_multi(s) -> frozenset:
    return frozenset().union(*s) if s else frozenset()


def users_multi(s, k: int) -> list:
    return [i for i, x in enumerate(s) if k in x]


def tc_multi_at(instance: Instance, s, agent: int, x: frozenset, alpha=Fraction(1)) -> Fraction:
    total = sum((instance.cc[agent][k] for k in x), Fraction(0))
    disc = Fraction(0)
    row = instance.dc[agent]
    for j, y in enumerate(s):
        if j != agent and not (x & y):
            disc += row[j]
    return total + alpha * disc


def tc_multi(instance: Instance, s, agent: int) -> Fraction:
    return tc_multi_at(instance, s, agent, s[agent])


def _disc_multi(instance: Instance, s) -> Fraction:
    return sum((instance.dc[i][j] for i, j in combinations(range(instance.n), 2)
                if not (s[i] & s[j])), Fraction(0))


def social_cost_multi(instance: Instance, assignment) -> Fraction:
    s = check_multi(instance, assignment)
    fac = sum((instance.fcost[k] for k in open_multi(s)), Fraction(0))
    conn = sum((instance.cc[i][k] for i, x in enumerate(s) for k in x), Fraction(0))
    return fac + conn + 2 * _disc_multi(instance, s)


def potential_multi(instance: Instance, assignment, variant: str = "tilde", alpha=None) -> Fraction:
    s = check_multi(instance, assignment)
    conn = sum((instance.cc[i][k] for i, x in enumerate(s) for k in x), Fraction(0))
    disc = _disc_multi(instance, s)
    if variant == "tilde":
        return conn + disc
    fac = sum((instance.fcost[k] for k in open_multi(s)), Fraction(0))
    if variant == "full":
        return conn + disc + fac
    if variant == "alpha":
        return conn + check_alpha(alpha) * disc + fac
    raise ValueError(f"unknown potential variant {variant!r}")


def _order(x: frozenset):
    return (len(x), sorted(x))


def all_subsets(m: int) -> list:
    if m > MAX_FACILITIES:
        raise SizeCapExceeded(f"m = {m} exceeds the enumeration cap of {MAX_FACILITIES}")
    return sorted((frozenset(k for k in range(m) if mask >> k & 1) for mask in range(1 << m)),
                  key=_order)


def valid_deviations(instance: Instance, assignment, agent: int) -> list:
    """Every target set leaving at most one of the agent's facilities,
    including the current set, fewest facilities first."""
    s = check_multi(instance, assignment)
    cur = s[agent]
    return [x for x in all_subsets(instance.m) if len(cur - x) <= 1]


def next_best_response_multi(instance: Instance, s, agent: int, facility: int,
                             alpha=Fraction(1)) -> frozenset:
    """Best set after being forced off ``facility``: keeps the rest, may add
    open facilities, never rejoins ``facility``."""
    cur = s[agent]
    opened = open_multi(s)
    base = cur - {facility}
    extra = sorted(opened - cur - {facility})
    best, best_cost = None, None
    for r in range(len(extra) + 1):
        for add in combinations(extra, r):
            x = base | frozenset(add)
            c = tc_multi_at(instance, s, agent, x, alpha)
            if best_cost is None or c < best_cost or (c == best_cost and _order(x) < _order(best)):
                best, best_cost = x, c
    return best


def q_value_multi(instance: Instance, assignment, agent: int, facility: int,
                  alpha=Fraction(1)) -> Fraction:
    s = check_multi(instance, assignment)
    if facility not in s[agent]:
        raise ValueError(f"agent {agent} does not use facility {facility}")
    x = next_best_response_multi(instance, s, agent, facility, alpha)
    return tc_multi_at(instance, s, agent, x, alpha) - tc_multi_at(instance, s, agent, s[agent], alpha)


def q_matrix(instance: Instance, s, alpha=Fraction(1)) -> tuple:
    """``Q[i][k]`` for every facility the agent uses, zero elsewhere."""
    return tuple(tuple(q_value_multi(instance, s, i, k, alpha) if k in s[i] else Fraction(0)
                       for k in range(instance.m)) for i in range(instance.n))


def _matrix(instance: Instance, values) -> tuple:
    if values is None:
        return tuple((Fraction(0),) * instance.m for _ in range(instance.n))
    out = tuple(tuple(to_rat(v) for v in row) for row in values)
    if len(out) != instance.n or any(len(r) != instance.m for r in out):
        raise ValueError("expected an n x m matrix")
    return out


@dataclass(frozen=True)
class MultiState:
    instance: Instance
    assignment: tuple
    prices: tuple = field(default=None)

    def __post_init__(self):
        s = check_multi(self.instance, self.assignment)
        object.__setattr__(self, "assignment", s)
        prices = _matrix(self.instance, self.prices)
        for i, row in enumerate(prices):
            for k, p in enumerate(row):
                if p < 0:
                    raise ValueError(f"negative price for agent {i} at facility {k}")
                if p > 0 and k not in s[i]:
                    raise ValueError(f"agent {i} is charged at facility {k} it does not use")
        object.__setattr__(self, "prices", prices)

    def unbalanced(self) -> tuple:
        s, inst = self.assignment, self.instance
        return tuple(k for k in sorted(open_multi(s))
                     if sum((self.prices[i][k] for i in users_multi(s, k)), Fraction(0)) != inst.fcost[k])


@dataclass(frozen=True)
class MultiCertificate:
    budget_balanced: bool
    criterion: tuple  # per agent: both sufficient conditions hold
    literal: tuple  # per agent: no valid deviation is profitable
    unbalanced: tuple = ()

    @property
    def stable(self) -> bool:
        return self.budget_balanced and all(self.literal)

    @property
    def consistent(self) -> bool:
        """The sufficient conditions never accept a literally unstable agent."""
        return all(l or not c for c, l in zip(self.criterion, self.literal))

    @property
    def unstable_agents(self) -> tuple:
        return tuple(i for i, ok in enumerate(self.literal) if not ok)

    def __bool__(self):
        return self.stable


def _net(state: MultiState, payments, agent: int, keep) -> Fraction:
    return sum((state.prices[agent][k] - payments[agent][k] for k in keep), Fraction(0))


def is_stable_multi(state: MultiState, payments=None) -> MultiCertificate:
    """Check the two sufficient conditions and, independently, every valid
    deviation.  ``payments`` is an n x m matrix of per-facility payments."""
    inst, s = state.instance, state.assignment
    pay = _matrix(inst, payments)
    subsets = all_subsets(inst.m)
    criterion, literal = [], []
    for i in range(inst.n):
        cur = s[i]
        here_tc = tc_multi_at(inst, s, i, cur)
        join_ok = all(here_tc <= tc_multi_at(inst, s, i, x) for x in subsets if cur <= x)
        q_ok = all(state.prices[i][k] - pay[i][k] <= q_value_multi(inst, s, i, k) for k in cur)
        criterion.append(join_ok and q_ok)
        here = here_tc + _net(state, pay, i, cur)
        literal.append(all(here <= tc_multi_at(inst, s, i, x) + _net(state, pay, i, cur & x)
                           for x in subsets if len(cur - x) <= 1 and x != cur))
    bad = state.unbalanced()
    return MultiCertificate(not bad, tuple(criterion), tuple(literal), bad)


def is_alpha_stable_multi(state: MultiState, alpha) -> MultiCertificate:
    """Literal check that no valid deviation cuts cost below ``1/alpha``."""
    a = to_rat(alpha)
    inst, s = state.instance, state.assignment
    zero = _matrix(inst, None)
    literal = []
    for i in range(inst.n):
        cur = s[i]
        here = tc_multi_at(inst, s, i, cur) + _net(state, zero, i, cur)
        literal.append(all(here <= a * (tc_multi_at(inst, s, i, x) + _net(state, zero, i, cur & x))
                           for x in all_subsets(inst.m) if len(cur - x) <= 1 and x != cur))
    bad = state.unbalanced()
    return MultiCertificate(not bad, tuple(literal), tuple(literal), bad)


def _improving(instance: Instance, s, agent: int, alpha) -> Optional[frozenset]:
    cur = s[agent]
    opened = open_multi(s)
    best, best_cost = None, tc_multi_at(instance, s, agent, cur, alpha)
    for x in all_subsets(instance.m):
        if x == cur or len(cur - x) > 1 or not x <= opened:
            continue
        c = tc_multi_at(instance, s, agent, x, alpha)
        if c < best_cost:
            best, best_cost = x, c
    return best


def scale_multi(instance: Instance, s, charges) -> tuple:
    prices = [[Fraction(0)] * instance.m for _ in range(instance.n)]
    for k in sorted(open_multi(s)):
        users = users_multi(s, k)
        total = sum((charges[i][k] for i in users), Fraction(0))
        cost = instance.fcost[k]
        if total < cost:
            raise ValueError(f"facility {k}: charges {total} < cost {cost}")
        if cost == 0:
            continue
        for i in users:
            prices[i][k] = charges[i][k] * cost / total
    return tuple(tuple(r) for r in prices)


def stabilize_multi(instance: Instance, start: Optional[Sequence] = None, alpha=1):
    """Two-phase stabilization with drop-at-most-one moves.

    Returns ``(MultiState, Trace)``.  From a multi-mode optimum the result
    costs at most twice the optimum (``2 / alpha`` in general).
    """
    a = check_alpha(to_rat(alpha))
    all_subsets(instance.m)  # enforce the enumeration cap early
    s = check_multi(instance, start if start is not None else [()] * instance.n)

    def phi(x):
        return potential_multi(instance, x, "alpha", a)

    trace = Trace(phi(s))
    while True:
        moved = False
        for i in range(instance.n):
            x = _improving(instance, s, i, a)
            if x is not None:
                src = s[i]
                s = s[:i] + (x,) + s[i + 1:]
                trace.steps.append(Step("move", phi(s), agent=i, source=src, target=x))
                moved = True
                break
        if moved:
            continue
        closed = False
        for k in sorted(open_multi(s)):
            users = users_multi(s, k)
            total = sum((q_value_multi(instance, s, i, k, a) for i in users), Fraction(0))
            if instance.fcost[k] > total:
                moves = tuple((i, next_best_response_multi(instance, s, i, k, a)) for i in users)
                t = list(s)
                for i, x in moves:
                    t[i] = x
                s = tuple(t)
                trace.steps.append(Step("close", phi(s), facility=k, moves=moves))
                closed = True
                break
        if not closed:
            break
    prices = scale_multi(instance, s, q_matrix(instance, s, a))
    return MultiState(instance, s, prices), trace


@dataclass(frozen=True)
class MultiPeering:
    feasible: bool
    p: tuple  # p[k][i][j]: amount i pays j to keep j at facility k
    state: Optional[MultiState]
    payments: Optional[tuple]  # n x m: net received per facility
    facility: Optional[int] = None
    cut: frozenset = frozenset()


def peering_payments_multi(instance: Instance, s_star) -> MultiPeering:
    """One circulation per open facility with supplies ``Q_i(s*, f_k)``."""
    from .payments import build_circulation_from

    s = check_multi(instance, s_star)
    n, m = instance.n, instance.m
    q = q_matrix(instance, s)
    p = [[[Fraction(0)] * n for _ in range(n)] for _ in range(m)]
    charges = [[Fraction(0)] * m for _ in range(n)]
    for k in sorted(open_multi(s)):
        users = users_multi(s, k)
        circ = build_circulation_from(instance, k, users, {i: q[i][k] for i in users})
        res = feasible_circulation(circ.network)
        if not res.feasible:
            cut = frozenset(v for v in res.cut if isinstance(v, int))
            return MultiPeering(False, (), None, None, k, cut)
        for (i, j), e in circ.pair_edges.items():
            p[k][i][j] += res.flows[e]
            p[k][j][i] -= res.flows[e]
        for i, e in circ.facility_edges.items():
            charges[i][k] = res.flows[e]
    prices = scale_multi(instance, s, charges)
    pay = tuple(tuple(sum((p[k][j][i] for j in range(n)), Fraction(0)) for k in range(m))
                for i in range(n))
    return MultiPeering(True, tuple(tuple(tuple(r) for r in pk) for pk in p),
                        MultiState(instance, s, prices), pay)
