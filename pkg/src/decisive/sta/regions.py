"""Clock regions: canonical form, time successors, resets and batch encoding.

A region over clocks ``x_1..x_k`` with maximal constant ``M`` is stored as
two tuples.  ``ints[i]`` is the integral part of ``x_i``, or ``M + 1`` when
``x_i > M``.  ``cls[i]`` is ``-1`` for a clock above ``M``, ``0`` for a
bounded clock with zero fractional part, and otherwise the rank (from 1)
of its fractional part among the distinct nonzero fractional parts of the
bounded clocks.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

TIE_TOL = 1e-9


@dataclass(frozen=True)
class Region:
    ints: tuple
    cls: tuple

    def sort_key(self):
        return (self.ints, self.cls)

    @property
    def punctual(self) -> bool:
        """Some bounded clock sits on an integer, so time cannot stay here."""
        return any(c == 0 for c in self.cls)

    @property
    def memoryless(self) -> bool:
        return all((n == 0 and c == 0) or c == -1 for n, c in zip(self.ints, self.cls))

    @property
    def unbounded(self) -> bool:
        return all(c == -1 for c in self.cls)

    def describe(self, clocks, M: int) -> str:
        parts = []
        for x, n, c in zip(clocks, self.ints, self.cls):
            if c == -1:
                parts.append(f"{x}>{M}")
            elif c == 0:
                parts.append(f"{x}={n}")
            else:
                parts.append(f"{n}<{x}<{n + 1}")
        ranked = sorted((c, x) for x, c in zip(clocks, self.cls) if c > 0)
        if len(ranked) > 1:
            chain = []
            for i, (c, x) in enumerate(ranked):
                if i:
                    chain.append("=" if c == ranked[i - 1][0] else "<")
                chain.append(f"fr({x})")
            parts.append("".join(chain))
        return " && ".join(parts)

    def code(self, M: int) -> int:
        k = len(self.ints)
        out = 0
        for n in self.ints:
            out = out * (M + 2) + n
        for c in self.cls:
            out = out * (k + 2) + (c + 1)
        return out


def region_of(val, M: int) -> Region:
    """Canonical region of a valuation (exact for rationals, tie tolerance for floats)."""
    floating = any(isinstance(v, float) for v in val)
    ints, fracs = [], []
    for v in val:
        if v > M:
            ints.append(M + 1)
            fracs.append(None)
            continue
        n = math.floor(v)
        f = v - n
        if floating:
            if f < TIE_TOL:
                f = 0.0
            elif 1 - f < TIE_TOL:
                n, f = n + 1, 0.0
        ints.append(int(n))
        fracs.append(f)
    distinct = []
    for f in sorted(f for f in fracs if f is not None and f != 0):
        if not distinct or (f - distinct[-1] > (TIE_TOL if floating else 0)):
            distinct.append(f)
    cls = []
    for f in fracs:
        if f is None:
            cls.append(-1)
        elif f == 0:
            cls.append(0)
        else:
            cls.append(_rank_of(f, distinct, floating))
    return Region(tuple(ints), tuple(cls))


def _rank_of(f, distinct, floating) -> int:
    tol = TIE_TOL if floating else 0
    for i, g in enumerate(distinct):
        if abs(f - g) <= tol:
            return i + 1
    raise AssertionError("fractional part missing from its own ranking")


def time_successor(r: Region, M: int) -> Region:
    """The next region reached by letting time elapse."""
    ints, cls = list(r.ints), list(r.cls)
    if r.unbounded:
        return r
    if any(c == 0 for c in cls):
        for i, c in enumerate(cls):
            if c > 0:
                cls[i] = c + 1
        for i, c in enumerate(list(cls)):
            if c == 0:
                if ints[i] == M:
                    ints[i], cls[i] = M + 1, -1
                else:
                    cls[i] = 1
        return Region(tuple(ints), tuple(cls))
    top = max(cls)
    for i, c in enumerate(cls):
        if c == top:
            ints[i] += 1
            cls[i] = 0
    return Region(tuple(ints), tuple(cls))


def delay_regions(r: Region, M: int) -> list[Region]:
    """``r`` and all its time successors, ending with the unbounded region."""
    out = [r]
    while not out[-1].unbounded:
        out.append(time_successor(out[-1], M))
    return out


def representative(r: Region, M: int) -> tuple:
    """A rational valuation inside ``r``."""
    K = max([c for c in r.cls if c > 0], default=0)
    out = []
    for n, c in zip(r.ints, r.cls):
        if c == -1:
            out.append(Fraction(M + 1) + Fraction(1, 2))
        elif c == 0:
            out.append(Fraction(n))
        else:
            out.append(n + Fraction(c, K + 1))
    return tuple(out)


def sample_point(r: Region, M: int, rng: np.random.Generator) -> tuple:
    """A random float valuation inside ``r``."""
    K = max([c for c in r.cls if c > 0], default=0)
    fr = np.sort(rng.uniform(0.05, 0.95, size=K)) if K else np.array([])
    while K > 1 and np.min(np.diff(fr)) < 1e-3:
        fr = np.sort(rng.uniform(0.05, 0.95, size=K))
    out = []
    for n, c in zip(r.ints, r.cls):
        if c == -1:
            out.append(float(M + 1 + rng.uniform(0.0, 3.0)))
        elif c == 0:
            out.append(float(n))
        else:
            out.append(float(n + fr[c - 1]))
    return tuple(out)


def reset(r: Region, idx, M: int) -> Region:
    val = list(representative(r, M))
    for i in idx:
        val[i] = Fraction(0)
    return region_of(tuple(val), M)


def satisfies(guard, clocks, r: Region, M: int) -> bool:
    val = representative(r, M)
    pos = {x: i for i, x in enumerate(clocks)}
    return all(c.holds(val[pos[c.clock]]) for c in guard)


def all_regions(k: int, M: int) -> list[Region]:
    """Every region over ``k`` clocks."""
    out = []
    for ints in itertools.product(range(M + 2), repeat=k):
        bounded = [i for i, n in enumerate(ints) if n <= M]
        forced_zero = {i for i in bounded if ints[i] == M}
        free = [i for i in bounded if i not in forced_zero]
        for zero_mask in itertools.product((True, False), repeat=len(free)):
            zeros = forced_zero | {i for i, z in zip(free, zero_mask) if z}
            rest = [i for i in bounded if i not in zeros]
            for ranks in _weak_orders(len(rest)):
                cls = [-1] * k
                for i in zeros:
                    cls[i] = 0
                for i, rk in zip(rest, ranks):
                    cls[i] = rk
                out.append(Region(tuple(ints), tuple(cls)))
    return sorted(set(out), key=Region.sort_key)


def _weak_orders(n: int):
    """Dense rank vectors of length ``n`` (ordered set partitions)."""
    if n == 0:
        yield ()
        return
    for ranks in itertools.product(range(1, n + 1), repeat=n):
        used = sorted(set(ranks))
        if used == list(range(1, len(used) + 1)):
            yield ranks


def region_codes(vals: np.ndarray, M: int) -> np.ndarray:
    """Vectorised ``region_of(...).code(M)`` for the rows of ``vals``."""
    m, k = vals.shape
    above = vals > M
    n = np.floor(vals)
    f = vals - n
    up = (1 - f) < TIE_TOL
    n = np.where(up, n + 1, n)
    f = np.where(up | (f < TIE_TOL), 0.0, f)
    ints = np.where(above, M + 1, n).astype(np.int64)
    cls = np.zeros((m, k), dtype=np.int64)
    cls[above] = -1
    live = ~above & (f > 0)
    if k:
        key = np.where(live, f, 2.0)
        order = np.argsort(key, axis=1, kind="stable")
        sk = np.take_along_axis(key, order, axis=1)
        new_group = np.ones((m, k), dtype=bool)
        new_group[:, 1:] = (sk[:, 1:] - sk[:, :-1]) > TIE_TOL
        ranks_sorted = np.cumsum(new_group, axis=1)
        ranks = np.empty_like(ranks_sorted)
        np.put_along_axis(ranks, order, ranks_sorted, axis=1)
        cls = np.where(live, ranks, cls)
    code = np.zeros(m, dtype=np.int64)
    for i in range(k):
        code = code * (M + 2) + ints[:, i]
    for i in range(k):
        code = code * (k + 2) + (cls[:, i] + 1)
    return code
