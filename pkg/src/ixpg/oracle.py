"""Brute-force ground truth for small instances.

Costs are scaled by the common denominator to int64 so whole blocks of
assignments can be scored with numpy while staying exact.  Assignments are
enumerated in lexicographic order with "joins nothing" first; ties keep the
first one seen.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Optional

import numpy as np

from .model import Instance, SizeCapExceeded, State, q_values, scale_to_budget

LIMIT = 10 ** 7
CHUNK = 1 << 16


class OracleTooLarge(SizeCapExceeded):
    pass


@dataclass(frozen=True)
class _Scaled:
    scale: int
    cc: np.ndarray  # n x m
    dc: np.ndarray  # n x n
    f: np.ndarray  # m


def _scaled(instance: Instance) -> _Scaled:
    values = [v for row in instance.cc for v in row] + [v for row in instance.dc for v in row]
    values += list(instance.fcost)
    scale = 1
    for v in values:
        scale = math.lcm(scale, v.denominator)
    ints = [int(v * scale) for v in values]
    # worst case sums: every cost counted twice
    if 4 * sum(ints) + 1 >= 2 ** 62:
        raise OracleTooLarge("cost magnitudes overflow exact int64 evaluation")
    n, m = instance.n, instance.m
    cc = np.array(ints[: n * m], dtype=np.int64).reshape(n, m)
    dc = np.array(ints[n * m: n * m + n * n], dtype=np.int64).reshape(n, n)
    f = np.array(ints[n * m + n * n:], dtype=np.int64)
    return _Scaled(scale, cc, dc, f)


def single_space(instance: Instance) -> int:
    return (instance.m + 1) ** instance.n


def multi_space(instance: Instance) -> int:
    return 2 ** (instance.n * instance.m)


def _digits(start: int, stop: int, base: int, n: int) -> np.ndarray:
    idx = np.arange(start, stop, dtype=np.int64)
    out = np.empty((len(idx), n), dtype=np.int64)
    for pos in range(n - 1, -1, -1):
        out[:, pos] = idx % base
        idx //= base
    return out


def _single_block(sc: _Scaled, a: np.ndarray, with_q: bool):
    """Score a block of single-mode assignments (digit 0 = none, d = facility d-1).

    Returns social cost and, if requested, the stabilizable mask.
    """
    K, n = a.shape
    m = sc.f.shape[0]
    ccpad = np.concatenate([np.zeros((n, 1), dtype=np.int64), sc.cc], axis=1)
    conn = ccpad[np.arange(n), a].sum(axis=1)
    disc = np.zeros(K, dtype=np.int64)
    for i in range(n):
        for j in range(i + 1, n):
            if sc.dc[i, j]:
                disc += sc.dc[i, j] * ~((a[:, i] == a[:, j]) & (a[:, i] != 0))
    onehot = (a[:, :, None] == np.arange(m + 1)[None, None, :])  # K x n x (m+1)
    is_open = onehot[:, :, 1:].any(axis=1)  # K x m
    cost = conn + 2 * disc + is_open.astype(np.int64) @ sc.f
    if not with_q:
        return cost, None
    # linked[k, i, x]: disconnection weight to agents sitting at x (x >= 1)
    linked = np.einsum("knx,in->kix", onehot.astype(np.int64), sc.dc)
    total = sc.dc.sum(axis=1)  # n
    alt = ccpad[None, :, :] + total[None, :, None] - linked  # K x n x (m+1)
    alt[:, :, 0] = total[None, :]
    cur = np.take_along_axis(alt, a[:, :, None], axis=2)[:, :, 0]
    big = np.iinfo(np.int64).max // 4
    # candidate set: none plus other open facilities; agents at none try all
    allowed = np.zeros_like(alt, dtype=bool)
    allowed[:, :, 0] = True
    allowed[:, :, 1:] = is_open[:, None, :]
    allowed &= ~onehot
    at_none = a == 0
    allowed[at_none, 1:] = True
    allowed[at_none, 0] = False
    best = np.where(allowed, alt, big).min(axis=2)
    q = best - cur  # K x n
    ok = (q >= 0).all(axis=1)
    for k in range(m):
        users = onehot[:, :, k + 1]
        covered = (q * users).sum(axis=1) >= sc.f[k]
        ok &= ~is_open[:, k] | covered
    return cost, ok


def _decode_single(row) -> tuple:
    return tuple(None if d == 0 else int(d) - 1 for d in row)


def _check(size: int, limit: int):
    if size > limit:
        raise OracleTooLarge(f"{size} assignments exceed the limit {limit}")


@dataclass(frozen=True)
class OracleReport:
    optimum: tuple
    opt_cost: Fraction
    stabilizable: tuple  # ((assignment, cost), ...) in enumeration order
    pos: object  # Fraction or math.inf
    poa: object

    @property
    def best_stable(self):
        return min(self.stabilizable, key=lambda t: t[1])

    @property
    def worst_stable(self):
        return max(self.stabilizable, key=lambda t: t[1])


def _ratio(num: Fraction, den: Fraction):
    if den == 0:
        return Fraction(1) if num == 0 else math.inf
    return num / den


@lru_cache(maxsize=256)
def _single_report(instance: Instance, limit: int) -> OracleReport:
    _check(single_space(instance), limit)
    sc = _scaled(instance)
    n, base = instance.n, instance.m + 1
    size = base ** n
    best_cost, best_row = None, None
    stab = []
    for start in range(0, size, CHUNK):
        a = _digits(start, min(size, start + CHUNK), base, n)
        cost, ok = _single_block(sc, a, True)
        j = int(np.argmin(cost))
        if best_cost is None or cost[j] < best_cost:
            best_cost, best_row = int(cost[j]), a[j]
        for r in np.flatnonzero(ok):
            stab.append((_decode_single(a[r]), Fraction(int(cost[r]), sc.scale)))
    opt = Fraction(best_cost, sc.scale)
    if not stab:
        # cannot happen: stabilization always reaches such a state
        raise RuntimeError("no stabilizable assignment found")
    lo = min(c for _, c in stab)
    hi = max(c for _, c in stab)
    return OracleReport(_decode_single(best_row), opt, tuple(stab), _ratio(lo, opt), _ratio(hi, opt))


def analyze(instance: Instance, limit: int = LIMIT) -> OracleReport:
    """Optimum, every stabilizable assignment, and exact PoS / PoA."""
    return _single_report(instance, limit)


@lru_cache(maxsize=256)
def _multi_optimum(instance: Instance, limit: int):
    _check(multi_space(instance), limit)
    sc = _scaled(instance)
    n, m = instance.n, instance.m
    masks = np.arange(1 << m, dtype=np.int64)
    bits = (masks[:, None] >> np.arange(m)[None, :]) & 1  # 2^m x m
    conn_table = sc.cc @ bits.T  # n x 2^m
    open_cost = bits @ sc.f  # 2^m
    size = 1 << (n * m)
    best_cost, best_row = None, None
    for start in range(0, size, CHUNK):
        a = _digits(start, min(size, start + CHUNK), 1 << m, n)
        cost = conn_table[np.arange(n), a].sum(axis=1)
        union = np.bitwise_or.reduce(a, axis=1)
        cost += open_cost[union]
        for i in range(n):
            for j in range(i + 1, n):
                if sc.dc[i, j]:
                    cost += 2 * sc.dc[i, j] * ((a[:, i] & a[:, j]) == 0)
        j = int(np.argmin(cost))
        if best_cost is None or cost[j] < best_cost:
            best_cost, best_row = int(cost[j]), a[j]
    assignment = tuple(frozenset(k for k in range(m) if (int(x) >> k) & 1) for x in best_row)
    return assignment, Fraction(best_cost, sc.scale)


def brute_force_optimum(instance: Instance, mode: str = "single", limit: int = LIMIT):
    """Exact social optimum ``(assignment, cost)``.

    Multi-mode ties are broken by the per-agent facility bitmask.
    """
    if mode == "single":
        r = analyze(instance, limit)
        return r.optimum, r.opt_cost
    if mode == "multi":
        return _multi_optimum(instance, limit)
    raise ValueError(f"unknown mode {mode!r}")


def stabilizing_prices(instance: Instance, assignment) -> Optional[State]:
    """Budget-balanced prices making ``assignment`` stable, or ``None``."""
    q = q_values(instance, assignment)
    if any(v < 0 for v in q):
        return None
    try:
        shares = scale_to_budget(instance, assignment, q)
    except ValueError:
        return None
    return State.from_shares(instance, assignment, shares)


def enumerate_stabilizable(instance: Instance, with_witness: bool = False,
                           limit: int = LIMIT) -> list:
    """All assignments admitting budget-balanced stabilizing prices.

    Items are ``(assignment, cost)``, or ``(assignment, cost, state)`` with
    ``with_witness``.
    """
    items = analyze(instance, limit).stabilizable
    if not with_witness:
        return list(items)
    return [(s, c, stabilizing_prices(instance, s)) for s, c in items]


def price_of_stability(instance: Instance, limit: int = LIMIT):
    return analyze(instance, limit).pos


def price_of_anarchy(instance: Instance, limit: int = LIMIT):
    return analyze(instance, limit).poa
