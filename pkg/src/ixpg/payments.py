"""Stabilizing an optimal assignment with payments.

Two routes: a coordinator pays agents whose Q-value is negative, or agents
pay each other (peering) with amounts found by a per-facility circulation.
The module also builds the witness states used by the payment/PoS tradeoff.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .flow import INF, FlowNetwork, feasible_circulation
from .model import (Instance, State, check_assignment, facility_users, is_stable,
                    next_best_response, open_facilities, potential, q_values,
                    scale_to_budget, social_cost, tc_at)


class NotOptimalError(ValueError):
    """The given assignment cannot be the social optimum."""


@dataclass(frozen=True)
class DirectPayments:
    state: State
    delta: tuple  # per-agent payment from the coordinator

    @property
    def total(self) -> Fraction:
        return sum(self.delta, Fraction(0))


def direct_payment_scheme(instance: Instance, s_star) -> DirectPayments:
    """Charge agents with ``Q >= 0`` up to ``Q``; pay the others ``-Q``.

    Raises :class:`NotOptimalError` when some open facility's cost cannot be
    covered, which never happens at a true optimum.
    """
    s = check_assignment(instance, s_star)
    q = q_values(instance, s)
    charges = [max(v, Fraction(0)) for v in q]
    delta = tuple(max(-v, Fraction(0)) for v in q)
    try:
        shares = scale_to_budget(instance, s, charges)
    except ValueError as exc:
        raise NotOptimalError(str(exc)) from None
    return DirectPayments(State.from_shares(instance, s, shares), delta)


def minimal_payment(instance: Instance, s) -> Fraction:
    """Least total coordinator payment that makes ``s`` stable with some
    budget-balanced prices.

    Every agent must be paid at least ``max(0, -Q_i)``, and each open
    facility's users must be topped up until their nonnegative Q-values cover
    its cost.  Both lower bounds are met together, so their sum is exact.
    """
    s = check_assignment(instance, s)
    q = q_values(instance, s)
    total = sum((max(-v, Fraction(0)) for v in q), Fraction(0))
    for k in open_facilities(s):
        covered = sum((max(q[i], Fraction(0)) for i in facility_users(s, k)), Fraction(0))
        total += max(instance.fcost[k] - covered, Fraction(0))
    return total


@dataclass(frozen=True)
class Witness:
    s_star: tuple
    b: tuple  # each agent's best reply to s* (restricted to none / open in s*)
    part1: frozenset
    part2: frozenset
    s0: tuple
    s1: tuple
    s2: tuple
    reply_total: Fraction  # sum of tc_i(b_i, s*_-i)
    phis: tuple  # potential (without facility costs) of s0, s1, s2

    def property_holds(self) -> bool:
        return any(self.reply_total >= Fraction(4, 5) * p for p in self.phis)

    def switching_pairs(self) -> list:
        """Pairs inside one part that would trade facilities; always empty."""
        bad = []
        for part in (self.part1, self.part2):
            members = sorted(part)
            for x, i in enumerate(members):
                for j in members[x + 1:]:
                    if self.b[i] != self.b[j] and self.b[i] == self.s_star[j] \
                            and self.b[j] == self.s_star[i]:
                        bad.append((i, j))
        return bad


def best_replies(instance: Instance, s_star) -> tuple:
    s = check_assignment(instance, s_star)
    opened = sorted(open_facilities(s))
    out = []
    for i in range(instance.n):
        order = [s[i]] + [x for x in [None, *opened] if x != s[i]]
        best, best_cost = None, None
        for x in order:
            c = tc_at(instance, s, i, x)
            if best_cost is None or c < best_cost:
                best, best_cost = x, c
        out.append(best)
    return tuple(out)


def witness_states(instance: Instance, s_star) -> Witness:
    """Best replies ``b``, the two-part split and the states ``s0, s1, s2``.

    The second part holds agents moving to a lower-numbered facility and
    agents joining a facility from nothing; everyone else is in the first.
    Neither part then contains two agents that trade places.
    """
    s = check_assignment(instance, s_star)
    b = best_replies(instance, s)
    part2 = frozenset(i for i in range(instance.n)
                      if b[i] is not None and b[i] != s[i] and (s[i] is None or b[i] < s[i]))
    part1 = frozenset(range(instance.n)) - part2
    s0 = b
    s1 = tuple(b[i] if i in part1 else s[i] for i in range(instance.n))
    s2 = tuple(b[i] if i in part2 else s[i] for i in range(instance.n))
    total = sum((tc_at(instance, s, i, b[i]) for i in range(instance.n)), Fraction(0))
    phis = tuple(potential(instance, x) for x in (s0, s1, s2))
    return Witness(s, b, part1, part2, s0, s1, s2, total, phis)


@dataclass(frozen=True)
class TradeoffReport:
    s_star: tuple
    opt_cost: Fraction
    delta: Fraction
    pos: object
    ratio: Optional[Fraction]  # delta / cost(s*), None when cost is 0
    bound: Optional[Fraction]  # None when PoS is unbounded
    ok: bool
    witness_ok: bool


def tradeoff_check(instance: Instance, limit: Optional[int] = None) -> TradeoffReport:
    """Compare the coordinator's payment at the optimum with ``1 - 2/5 PoS``."""
    from . import oracle

    report = oracle.analyze(instance) if limit is None else oracle.analyze(instance, limit)
    s_star, opt = report.optimum, report.opt_cost
    delta = direct_payment_scheme(instance, s_star).total
    pos = report.pos
    bound = None if math.isinf(pos) else 1 - Fraction(2, 5) * pos
    if opt == 0:
        ratio = None
        ok = delta == 0
    else:
        ratio = delta / opt
        ok = bound is not None and ratio <= bound
    return TradeoffReport(s_star, opt, delta, pos, ratio, bound, ok,
                          witness_states(instance, s_star).property_holds())


# ---- peering -------------------------------------------------------------

@dataclass(frozen=True)
class Circulation:
    facility: int
    users: tuple
    network: FlowNetwork
    pair_edges: dict  # (i, j) -> edge index, both directions
    facility_edges: dict  # i -> edge index of i -> facility


def build_circulation(instance: Instance, s_star, facility: int,
                      q: Optional[tuple] = None) -> Circulation:
    """Network whose feasible flows are stabilizing peer payments.

    Users supply their Q-value, the facility node demands its cost and the
    sink ``"z"`` absorbs the surplus.
    """
    s = check_assignment(instance, s_star)
    users = facility_users(s, facility)
    if not users:
        raise ValueError(f"facility {facility} is not open")
    if q is None:
        q = q_values(instance, s)
    return build_circulation_from(instance, facility, users, {i: q[i] for i in users})


def build_circulation_from(instance: Instance, facility: int, users, supplies: dict) -> Circulation:
    """Circulation for ``users`` of ``facility`` with the given Q-values."""
    users = tuple(users)
    net = FlowNetwork()
    for i in users:
        net.add_node(i, supplies[i])
    fnode = ("f", facility)
    cost = instance.fcost[facility]
    net.add_node(fnode, -cost)
    net.add_node("z", -(sum((supplies[i] for i in users), Fraction(0)) - cost))
    pair_edges, facility_edges = {}, {}
    for i in users:
        for j in users:
            if i != j:
                pair_edges[(i, j)] = net.add_edge(i, j, instance.dc[i][j])
    for i in users:
        facility_edges[i] = net.add_edge(i, fnode, INF)
    net.add_edge(fnode, "z", INF)
    return Circulation(facility, users, net, pair_edges, facility_edges)


@dataclass(frozen=True)
class PeeringResult:
    feasible: bool
    p: tuple  # p[i][j]: net amount i pays j; antisymmetric
    state: Optional[State]  # s* with budget-balanced prices, when feasible
    cut: frozenset = frozenset()  # agents in a violating set, when infeasible
    facility: Optional[int] = None  # failing facility; None for an idle agent with Q < 0
    refutation: Optional[tuple] = None  # cheaper assignment, when infeasible

    @property
    def delta(self) -> tuple:
        """Net payment received by each agent."""
        n = len(self.p)
        return tuple(sum((self.p[j][i] for j in range(n)), Fraction(0)) for i in range(n))


def refute(instance: Instance, s_star, agents) -> tuple:
    """Move ``agents`` simultaneously to their next best responses."""
    s = check_assignment(instance, s_star)
    t = list(s)
    for i in agents:
        t[i] = next_best_response(instance, s, i)
    return tuple(t)


def peering_payments(instance: Instance, s_star) -> PeeringResult:
    """Solve one circulation per open facility and read off payments.

    ``p_ij = v_ij - v_ji`` and each user's price is its flow into the
    facility, scaled down to the facility cost.  An infeasible circulation
    yields the violating agent set and the cheaper assignment it implies; so
    does an agent that joined nothing but has a negative Q-value.
    """
    s = check_assignment(instance, s_star)
    n = instance.n
    q = q_values(instance, s)
    zero = tuple(tuple(Fraction(0) for _ in range(n)) for _ in range(n))
    # an idle agent with Q < 0 gains by joining an open facility on its own;
    # no circulation covers it, so report it directly
    for i in range(n):
        if s[i] is None and q[i] < 0:
            return PeeringResult(False, zero, None, frozenset([i]), None, refute(instance, s, [i]))
    p = [[Fraction(0)] * n for _ in range(n)]
    charges = [Fraction(0)] * n
    for k in sorted(open_facilities(s)):
        circ = build_circulation(instance, s, k, q)
        res = feasible_circulation(circ.network)
        if not res.feasible:
            cut = frozenset(v for v in res.cut if isinstance(v, int))
            return PeeringResult(False, zero, None, cut, k, refute(instance, s, sorted(cut)))
        for (i, j), e in circ.pair_edges.items():
            p[i][j] += res.flows[e]
            p[j][i] -= res.flows[e]
        for i, e in circ.facility_edges.items():
            charges[i] = res.flows[e]
    shares = scale_to_budget(instance, s, charges)
    state = State.from_shares(instance, s, shares)
    return PeeringResult(True, tuple(tuple(r) for r in p), state, facility=None)


def doubled_weights(instance: Instance, s_star, result: Optional[PeeringResult] = None) -> Instance:
    """Raise each ``dc(i, j)`` by the peering amount between ``i`` and ``j``.

    The optimum stays optimal-and-stable without any payments in the new
    instance, and no weight more than doubles.
    """
    if result is None:
        result = peering_payments(instance, s_star)
    if not result.feasible:
        raise NotOptimalError("peering circulation is infeasible")
    n = instance.n
    dc = [[instance.dc[i][j] + abs(result.p[i][j]) for j in range(n)] for i in range(n)]
    return instance.with_dc(dc)


def check_peering(instance: Instance, result: PeeringResult) -> list:
    """Problems with a feasible peering result (empty when it is valid)."""
    problems = []
    n = instance.n
    s = result.state.assignment
    for i in range(n):
        for j in range(n):
            if result.p[i][j] != -result.p[j][i]:
                problems.append(f"payments not antisymmetric at ({i},{j})")
            if abs(result.p[i][j]) > instance.dc[i][j]:
                problems.append(f"payment {i}->{j} exceeds dc")
            if result.p[i][j] != 0 and (s[i] is None or s[i] != s[j]):
                problems.append(f"payment {i}->{j} between agents not sharing a facility")
    cert = is_stable(result.state, result.delta)
    if not cert.budget_balanced:
        problems.append("not budget balanced")
    problems += [f"agent {i} unstable" for i in cert.unstable_agents]
    return problems


def refutation_gain(instance: Instance, s_star, result: PeeringResult) -> Fraction:
    """Social cost saved by the refutation assignment (positive means cheaper)."""
    return social_cost(instance, s_star) - social_cost(instance, result.refutation)
