"""Core game model: instances, states, agent costs, potentials and Q-values.

Every game quantity is an exact :class:`fractions.Fraction`.  Facilities and
agents are 0-indexed.  In single-facility mode an agent's strategy is a
facility index or ``None`` (the agent joins nothing).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

Rat = Fraction
Strategy = Optional[int]
Assignment = tuple  # tuple[Strategy, ...]


def to_rat(value) -> Fraction:
    """Parse an int, decimal/ratio string, Fraction or float exactly."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not costs")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        # repr gives the shortest decimal that round-trips, which is what a
        # JSON author typed.
        return Fraction(repr(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot interpret {value!r} as a rational")


def format_rat(value: Fraction) -> str:
    return str(value)


class InvalidInstance(ValueError):
    pass


class SizeCapExceeded(ValueError):
    """An exhaustive enumeration would exceed its configured cap."""


@dataclass(frozen=True)
class Instance:
    cc: tuple  # n x m connection costs
    dc: tuple  # n x n symmetric disconnection costs, zero diagonal
    fcost: tuple  # m facility costs

    def __post_init__(self):
        cc = tuple(tuple(to_rat(v) for v in row) for row in self.cc)
        dc = tuple(tuple(to_rat(v) for v in row) for row in self.dc)
        fcost = tuple(to_rat(v) for v in self.fcost)
        object.__setattr__(self, "cc", cc)
        object.__setattr__(self, "dc", dc)
        object.__setattr__(self, "fcost", fcost)
        n, m = len(cc), len(fcost)
        if n < 1 or m < 1:
            raise InvalidInstance("need at least one agent and one facility")
        if any(len(row) != m for row in cc):
            raise InvalidInstance("cc must be n x m")
        if len(dc) != n or any(len(row) != n for row in dc):
            raise InvalidInstance("dc must be n x n")
        for i in range(n):
            if dc[i][i] != 0:
                raise InvalidInstance(f"dc({i},{i}) must be 0")
            for j in range(i + 1, n):
                if dc[i][j] != dc[j][i]:
                    raise InvalidInstance(f"dc is not symmetric at ({i},{j})")
        if any(v < 0 for row in cc for v in row) or any(v < 0 for row in dc for v in row):
            raise InvalidInstance("costs must be nonnegative")
        if any(v < 0 for v in fcost):
            raise InvalidInstance("facility costs must be nonnegative")

    @property
    def n(self) -> int:
        return len(self.cc)

    @property
    def m(self) -> int:
        return len(self.fcost)

    @classmethod
    def from_pairs(cls, cc, fcost, pairs: dict) -> "Instance":
        """Build from a sparse ``{(i, j): dc}`` map."""
        n = len(cc)
        dc = [[Fraction(0)] * n for _ in range(n)]
        for (i, j), v in pairs.items():
            dc[i][j] = dc[j][i] = to_rat(v)
        return cls(cc, dc, fcost)

    def with_dc(self, dc) -> "Instance":
        return Instance(self.cc, dc, self.fcost)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "cc": [[str(v) for v in row] for row in self.cc],
            "dc": [[str(v) for v in row] for row in self.dc],
            "fcost": [str(v) for v in self.fcost],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Instance":
        try:
            inst = cls(data["cc"], data["dc"], data["fcost"])
        except KeyError as exc:
            raise InvalidInstance(f"missing field {exc}") from None
        except (TypeError, ValueError, ZeroDivisionError) as exc:
            if isinstance(exc, InvalidInstance):
                raise
            raise InvalidInstance(str(exc)) from None
        if "n" in data and data["n"] != inst.n:
            raise InvalidInstance("n does not match cc")
        if "m" in data and data["m"] != inst.m:
            raise InvalidInstance("m does not match fcost")
        return inst

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Instance":
        return cls.from_dict(json.loads(text))

    def digest(self) -> str:
        """Stable content hash used to tie reports to their instance."""
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]


def check_assignment(instance: Instance, assignment: Sequence[Strategy]) -> tuple:
    s = tuple(assignment)
    if len(s) != instance.n:
        raise ValueError(f"assignment has {len(s)} entries, expected {instance.n}")
    for x in s:
        if x is not None and not (isinstance(x, int) and 0 <= x < instance.m):
            raise ValueError(f"invalid strategy {x!r}")
    return s


def open_facilities(assignment: Sequence[Strategy]) -> frozenset:
    return frozenset(x for x in assignment if x is not None)


def facility_users(assignment: Sequence[Strategy], k: int) -> list:
    return [i for i, x in enumerate(assignment) if x == k]


def connected(a: Strategy, b: Strategy) -> bool:
    # two agents that both joined nothing still count as disconnected
    return a is not None and a == b


def tc_at(instance: Instance, assignment: Sequence[Strategy], agent: int, x: Strategy,
          alpha: Fraction = Fraction(1)) -> Fraction:
    """Cost of ``agent`` if it played ``x`` while the others keep ``assignment``.

    ``alpha`` scales the disconnection part; ``alpha = 1`` is the plain cost
    without facility share.
    """
    dc = instance.dc[agent]
    total = instance.cc[agent][x] if x is not None else Fraction(0)
    disc = Fraction(0)
    for j, y in enumerate(assignment):
        if j != agent and not connected(x, y):
            disc += dc[j]
    return total + alpha * disc


def tc(instance: Instance, assignment: Sequence[Strategy], agent: int) -> Fraction:
    return tc_at(instance, assignment, agent, assignment[agent])


def social_cost(instance: Instance, assignment: Sequence[Strategy]) -> Fraction:
    total = sum((instance.fcost[k] for k in open_facilities(assignment)), Fraction(0))
    for i, x in enumerate(assignment):
        if x is not None:
            total += instance.cc[i][x]
    return total + 2 * _disconnected_weight(instance, assignment)


def _disconnected_weight(instance: Instance, assignment: Sequence[Strategy]) -> Fraction:
    total = Fraction(0)
    n = instance.n
    for i in range(n):
        row = instance.dc[i]
        for j in range(i + 1, n):
            if not connected(assignment[i], assignment[j]):
                total += row[j]
    return total


def potential(instance: Instance, assignment: Sequence[Strategy], variant: str = "tilde",
              alpha=None) -> Fraction:
    """``tilde``: connection plus disconnection; ``full`` adds open facility
    costs; ``alpha`` weights disconnection by ``alpha`` and adds facility costs.
    """
    conn = sum((instance.cc[i][x] for i, x in enumerate(assignment) if x is not None), Fraction(0))
    disc = _disconnected_weight(instance, assignment)
    if variant == "tilde":
        return conn + disc
    fac = sum((instance.fcost[k] for k in open_facilities(assignment)), Fraction(0))
    if variant == "full":
        return conn + disc + fac
    if variant == "alpha":
        a = check_alpha(alpha)
        return conn + a * disc + fac
    raise ValueError(f"unknown potential variant {variant!r}")


def check_alpha(alpha) -> Fraction:
    if alpha is None:
        raise ValueError("alpha is required")
    a = to_rat(alpha)
    if not (1 <= a <= 2):
        raise ValueError(f"alpha must lie in [1, 2], got {a}")
    return a


def nbr_candidates(instance: Instance, assignment: Sequence[Strategy], agent: int) -> list:
    """Alternatives considered for the next best response, in tie-break order.

    Leaving a facility: ``None`` then the other open facilities.  Closed
    facilities are never better than ``None`` so they are skipped.  An agent
    that joined nothing has no ``None`` alternative and may pick any facility
    (open ones preferred on ties).
    """
    current = assignment[agent]
    opened = open_facilities(assignment)
    if current is not None:
        return [None] + [k for k in range(instance.m) if k in opened and k != current]
    return ([k for k in range(instance.m) if k in opened]
            + [k for k in range(instance.m) if k not in opened])


def _argmin(candidates, cost):
    best, best_cost = None, None
    for x in candidates:
        c = cost(x)
        if best_cost is None or c < best_cost:
            best, best_cost = x, c
    return best, best_cost


def next_best_response(instance: Instance, assignment: Sequence[Strategy], agent: int,
                       alpha: Fraction = Fraction(1)) -> Strategy:
    s = tuple(assignment)
    best, _ = _argmin(nbr_candidates(instance, s, agent),
                      lambda x: tc_at(instance, s, agent, x, alpha))
    return best


def q_value(instance: Instance, assignment: Sequence[Strategy], agent: int,
            alpha: Fraction = Fraction(1)) -> Fraction:
    """Price agent ``agent`` tolerates before it would rather take its next
    best response.  With ``alpha != 1`` the scaled agent cost is used."""
    s = tuple(assignment)
    _, best = _argmin(nbr_candidates(instance, s, agent),
                      lambda x: tc_at(instance, s, agent, x, alpha))
    return best - tc_at(instance, s, agent, s[agent], alpha)


def q_values(instance: Instance, assignment: Sequence[Strategy], alpha=Fraction(1)) -> tuple:
    return tuple(q_value(instance, assignment, i, alpha) for i in range(instance.n))


def zero_prices(instance: Instance) -> tuple:
    return tuple((Fraction(0),) * instance.m for _ in range(instance.n))


@dataclass(frozen=True)
class State:
    """An assignment together with a pricing strategy (n x m price shares)."""

    instance: Instance
    assignment: tuple
    prices: tuple = field(default=None)

    def __post_init__(self):
        s = check_assignment(self.instance, self.assignment)
        object.__setattr__(self, "assignment", s)
        if self.prices is None:
            prices = zero_prices(self.instance)
        else:
            prices = tuple(tuple(to_rat(v) for v in row) for row in self.prices)
        if len(prices) != self.instance.n or any(len(r) != self.instance.m for r in prices):
            raise ValueError("prices must be n x m")
        for i, row in enumerate(prices):
            for k, p in enumerate(row):
                if p < 0:
                    raise ValueError(f"negative price for agent {i} at facility {k}")
                if p > 0 and s[i] != k:
                    raise ValueError(f"agent {i} is charged at facility {k} it does not use")
        object.__setattr__(self, "prices", prices)

    @classmethod
    def from_shares(cls, instance: Instance, assignment, shares: Sequence) -> "State":
        """Build from one price per agent, charged at the agent's own facility."""
        s = check_assignment(instance, assignment)
        prices = [[Fraction(0)] * instance.m for _ in range(instance.n)]
        for i, p in enumerate(shares):
            p = to_rat(p)
            if s[i] is None:
                if p != 0:
                    raise ValueError(f"agent {i} joins nothing but has price {p}")
            else:
                prices[i][s[i]] = p
        return cls(instance, s, prices)

    def price(self, agent: int) -> Fraction:
        x = self.assignment[agent]
        return self.prices[agent][x] if x is not None else Fraction(0)

    def shares(self) -> tuple:
        return tuple(self.price(i) for i in range(self.instance.n))


def rc(state: State, agent: int, payments: Optional[Sequence] = None) -> Fraction:
    """Agent's total cost: tc plus its price share minus any payment received."""
    delta = to_rat(payments[agent]) if payments is not None else Fraction(0)
    return tc(state.instance, state.assignment, agent) + state.price(agent) - delta


def unbalanced_facilities(state: State) -> tuple:
    inst, s = state.instance, state.assignment
    bad = []
    for k in sorted(open_facilities(s)):
        if sum((state.prices[i][k] for i in facility_users(s, k)), Fraction(0)) != inst.fcost[k]:
            bad.append(k)
    return tuple(bad)


@dataclass(frozen=True)
class StabilityCertificate:
    budget_balanced: bool
    agent_stable: tuple
    unbalanced: tuple = ()

    @property
    def stable(self) -> bool:
        return self.budget_balanced and all(self.agent_stable)

    @property
    def unstable_agents(self) -> tuple:
        return tuple(i for i, ok in enumerate(self.agent_stable) if not ok)

    def __bool__(self) -> bool:
        return self.stable


def _check_payments(instance: Instance, payments) -> tuple:
    if payments is None:
        return (Fraction(0),) * instance.n
    p = tuple(to_rat(v) for v in payments)
    if len(p) != instance.n:
        raise ValueError("payment vector must have one entry per agent")
    return p


def is_stable(state: State, payments: Optional[Sequence] = None) -> StabilityCertificate:
    """Stability via the Q-value criterion ``price - payment <= Q``.

    The criterion is exact: the next best response is the cheapest deviation.
    """
    inst, s = state.instance, state.assignment
    delta = _check_payments(inst, payments)
    per_agent = tuple(state.price(i) - delta[i] <= q_value(inst, s, i) for i in range(inst.n))
    bad = unbalanced_facilities(state)
    return StabilityCertificate(not bad, per_agent, bad)


def is_stable_literal(state: State, payments: Optional[Sequence] = None) -> StabilityCertificate:
    """Stability by scanning every unilateral deviation; independent of Q."""
    inst, s = state.instance, state.assignment
    delta = _check_payments(inst, payments)
    per_agent = []
    for i in range(inst.n):
        here = rc(state, i, delta)
        per_agent.append(all(here <= tc_at(inst, s, i, x)
                             for x in [None, *range(inst.m)] if x != s[i]))
    bad = unbalanced_facilities(state)
    return StabilityCertificate(not bad, tuple(per_agent), bad)


def is_alpha_stable(state: State, alpha) -> StabilityCertificate:
    a = to_rat(alpha)
    if a < 1:
        raise ValueError("alpha must be at least 1")
    inst, s = state.instance, state.assignment
    per_agent = []
    for i in range(inst.n):
        here = rc(state, i)
        per_agent.append(all(here <= a * tc_at(inst, s, i, x)
                             for x in [None, *range(inst.m)] if x != s[i]))
    bad = unbalanced_facilities(state)
    return StabilityCertificate(not bad, tuple(per_agent), bad)


def scale_to_budget(instance: Instance, assignment, charges: Sequence[Fraction]) -> tuple:
    """Scale each facility's per-agent charges down so they sum to its cost.

    Returns per-agent shares.  Raises ``ValueError`` if some open facility
    cannot be covered.
    """
    shares = [Fraction(0)] * instance.n
    for k in sorted(open_facilities(assignment)):
        users = facility_users(assignment, k)
        total = sum((charges[i] for i in users), Fraction(0))
        cost = instance.fcost[k]
        if total < cost:
            raise ValueError(f"facility {k}: charges {total} < cost {cost}")
        if cost == 0:
            continue
        for i in users:
            shares[i] = charges[i] * cost / total
    return tuple(shares)


def all_strategies(instance: Instance) -> list:
    return [None, *range(instance.m)]


def strategy_label(x: Strategy) -> str:
    return "none" if x is None else f"f{x + 1}"


def assignment_label(assignment: Iterable[Strategy]) -> str:
    return "{" + ",".join("∅" if x is None else f"f{x + 1}" for x in assignment) + "}"
