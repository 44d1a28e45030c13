"""Best responses and the two-phase stabilization procedure.

Phase A lets single agents make strictly improving moves that never enter a
closed facility.  Phase B closes a facility whose users cannot jointly cover
its cost with their Q-values, moving every user to its next best response at
once.  Both phases strictly lower the potential, so the loop terminates.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .model import (Instance, State, check_alpha, check_assignment, facility_users,
                    next_best_response, open_facilities, potential, q_values,
                    scale_to_budget, tc_at, to_rat)


@dataclass(frozen=True)
class Step:
    kind: str  # "move" or "close"
    phi: Fraction
    agent: Optional[int] = None
    source: object = None
    target: object = None
    facility: Optional[int] = None
    moves: tuple = ()  # ((agent, target), ...) for a close step

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "phi": str(self.phi)}
        if self.kind == "move":
            d.update({"agent": self.agent, "from": _enc(self.source), "to": _enc(self.target)})
        else:
            d.update({"facility": self.facility,
                      "moves": [{"agent": i, "to": _enc(x)} for i, x in self.moves]})
        return d


def _enc(x):
    if isinstance(x, (frozenset, set)):
        return sorted(x)
    return x


@dataclass
class Trace:
    initial_phi: Fraction
    steps: list = field(default_factory=list)

    def phis(self) -> list:
        return [self.initial_phi] + [s.phi for s in self.steps]

    def strictly_decreasing(self) -> bool:
        p = self.phis()
        return all(b < a for a, b in zip(p, p[1:]))

    def to_jsonl(self) -> str:
        return "".join(json.dumps(s.to_dict(), sort_keys=True) + "\n" for s in self.steps)

    def __len__(self):
        return len(self.steps)


def best_response(state: State, agent: int):
    """Best strategy for ``agent`` when any new facility is anticipated free.

    Staying costs tc plus the agent's current price.  Ties prefer staying,
    then joining nothing, then the lowest facility index.
    """
    inst, s = state.instance, state.assignment
    current = s[agent]
    best = current
    best_cost = tc_at(inst, s, agent, current) + state.price(agent)
    for x in [None, *range(inst.m)]:
        if x == current:
            continue
        c = tc_at(inst, s, agent, x)
        if c < best_cost:
            best, best_cost = x, c
    return best


def improving_move(instance: Instance, s: tuple, agent: int, alpha=Fraction(1)):
    """Cheapest strictly improving move avoiding closed facilities, or ``None``
    paired with ``False`` when the agent is content."""
    current = s[agent]
    opened = open_facilities(s)
    here = tc_at(instance, s, agent, current, alpha)
    best, best_cost = None, here
    found = False
    for x in [None, *sorted(opened)]:
        if x == current:
            continue
        c = tc_at(instance, s, agent, x, alpha)
        if c < best_cost:
            best, best_cost, found = x, c, True
    return found, best


def _run(instance: Instance, start, alpha: Fraction):
    s = check_assignment(instance, start if start is not None else (None,) * instance.n)
    variant = "full" if alpha == 1 else "alpha"

    def phi(a):
        return potential(instance, a, variant, alpha if variant == "alpha" else None)

    trace = Trace(phi(s))
    while True:
        moved = False
        for i in range(instance.n):
            found, x = improving_move(instance, s, i, alpha)
            if found:
                src = s[i]
                s = s[:i] + (x,) + s[i + 1:]
                trace.steps.append(Step("move", phi(s), agent=i, source=src, target=x))
                moved = True
                break
        if moved:
            continue
        q = q_values(instance, s, alpha)
        closed = False
        for k in sorted(open_facilities(s)):
            users = facility_users(s, k)
            if instance.fcost[k] > sum((q[i] for i in users), Fraction(0)):
                moves = tuple((i, next_best_response(instance, s, i, alpha)) for i in users)
                t = list(s)
                for i, x in moves:
                    t[i] = x
                s = tuple(t)
                trace.steps.append(Step("close", phi(s), facility=k, moves=moves))
                closed = True
                break
        if not closed:
            break
    shares = scale_to_budget(instance, s, q_values(instance, s, alpha))
    return State.from_shares(instance, s, shares), trace


def stabilize(instance: Instance, start: Optional[Sequence] = None):
    """Return a stable, budget-balanced state and the trace that reached it.

    ``start`` defaults to everyone joining nothing.  Started from a social
    optimum the result costs at most twice the optimum.
    """
    return _run(instance, start, Fraction(1))


def stabilize_alpha(instance: Instance, alpha, start: Optional[Sequence] = None):
    """Same procedure on the cost where disconnection is weighted by ``alpha``.

    The result is ``alpha``-approximately stable; from an optimum its cost is
    at most ``2 / alpha`` times the optimum.
    """
    return _run(instance, start, check_alpha(to_rat(alpha)))
