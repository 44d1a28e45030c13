"""Instance generators: seeded random instances and the two named fixtures."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .model import Instance, to_rat

FIXTURES = ("paper-pos", "paper-poa")


def paper_pos(eps=Fraction(1, 2)) -> Instance:
    """Two agents, one free facility; agent 2 pays ``1 + eps`` to join it.

    The only stable outcomes leave both agents disconnected, so the price of
    stability is ``2 / (1 + eps)``.
    """
    eps = to_rat(eps)
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    return Instance([[0], [1 + eps]], [[0, 1], [1, 0]], [0])


def paper_poa() -> Instance:
    """Two agents, one free facility, both join at zero cost.

    Nobody joining is stable (cost 2) while the optimum costs 0.
    """
    return Instance([[0], [0]], [[0, 1], [1, 0]], [0])


def fixture(name: str, eps=Fraction(1, 2)) -> Instance:
    if name == "paper-pos":
        return paper_pos(eps)
    if name == "paper-poa":
        return paper_poa()
    raise ValueError(f"unknown fixture {name!r}; choose from {', '.join(FIXTURES)}")


def random_instance(n: int, m: int, rng, cc_range=(0, 10), dc_range=(0, 5),
                    fcost_range=(0, 10), density: float = 1.0, denominator: int = 1) -> Instance:
    """Integer costs drawn uniformly from inclusive ranges, divided by
    ``denominator``.  Each agent pair gets a nonzero disconnection draw with
    probability ``density``.

    ``rng`` is a ``numpy.random.Generator`` or an integer seed.
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    for lo, hi in (cc_range, dc_range, fcost_range):
        if lo < 0 or hi < lo:
            raise ValueError("cost ranges must satisfy 0 <= lo <= hi")
    if not 0 <= density <= 1:
        raise ValueError("density must lie in [0, 1]")
    if denominator < 1:
        raise ValueError("denominator must be positive")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)

    def draw(lo, hi, size):
        return [Fraction(int(v), denominator) for v in rng.integers(lo, hi + 1, size=size)]

    cc = [draw(*cc_range, m) for _ in range(n)]
    dc = [[Fraction(0)] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < density:
                dc[i][j] = dc[j][i] = draw(*dc_range, 1)[0]
    fcost = draw(*fcost_range, m)
    return Instance(cc, dc, fcost)


def random_instances(count: int, seed: int, n_range=(1, 6), m_range=(1, 3), **kwargs):
    """Yield ``count`` reproducible instances with sizes drawn from the ranges."""
    rng = np.random.default_rng(seed)
    for _ in range(count):
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        m = int(rng.integers(m_range[0], m_range[1] + 1))
        yield random_instance(n, m, rng, **kwargs)
