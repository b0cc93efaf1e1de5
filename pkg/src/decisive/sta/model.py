"""Stochastic timed automata: syntax, guards and delay sets."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction

from ..errors import DeadlockedConfiguration, InvalidModel

OPS = ("<=", ">=", "<", ">", "=")
_OP = r"(<=|>=|==|<|>|=)"
_CLOCK_FIRST = re.compile(r"^\s*([A-Za-z_]\w*)\s*" + _OP + r"\s*(\d+)\s*$")
_CONST_FIRST = re.compile(r"^\s*(\d+)\s*" + _OP + r"\s*([A-Za-z_]\w*)\s*$")
_BETWEEN = re.compile(r"^\s*(\d+)\s*" + _OP + r"\s*([A-Za-z_]\w*)\s*" + _OP + r"\s*(\d+)\s*$")
_FLIP = {"<": ">", "<=": ">=", ">": "<", ">=": "<=", "=": "="}


@dataclass(frozen=True)
class Constraint:
    clock: str
    op: str
    const: int

    def holds(self, v) -> bool:
        c = self.const
        return {"<": v < c, "<=": v <= c, "=": v == c, ">=": v >= c, ">": v > c}[self.op]

    def __str__(self):
        return f"{self.clock}{self.op}{self.const}"


def parse_guard(text: str | None) -> tuple[Constraint, ...]:
    """``"x<1 && 1<y<2"``; empty text or ``"true"`` is the trivial guard."""
    if text is None or not text.strip() or text.strip() == "true":
        return ()
    out = []

    def op(o):
        return "=" if o == "==" else o

    for part in text.split("&&"):
        if m := _CLOCK_FIRST.match(part):
            clock, o, c = m.groups()
            out.append(Constraint(clock, op(o), int(c)))
        elif m := _CONST_FIRST.match(part):
            c, o, clock = m.groups()
            out.append(Constraint(clock, _FLIP[op(o)], int(c)))
        elif m := _BETWEEN.match(part):
            c1, o1, clock, o2, c2 = m.groups()
            out.append(Constraint(clock, _FLIP[op(o1)], int(c1)))
            out.append(Constraint(clock, op(o2), int(c2)))
        else:
            raise InvalidModel(f"cannot parse guard atom {part.strip()!r} (expected e.g. x<1)")
    return tuple(out)


@dataclass(frozen=True)
class StaEdge:
    source: str
    guard: tuple
    resets: frozenset
    target: str
    weight: int = 1

    def guard_text(self) -> str:
        return " && ".join(str(c) for c in self.guard) or "true"


@dataclass(frozen=True)
class DelayDist:
    kind: str
    rate: float | None = None

    def __post_init__(self):
        if self.kind not in ("uniform", "exponential", "dirac"):
            raise InvalidModel(f"unknown delay distribution {self.kind!r}")
        if self.kind == "exponential" and not (self.rate and self.rate > 0):
            raise InvalidModel("exponential delays need a positive rate")


@dataclass(frozen=True)
class DelayInterval:
    lo: object
    hi: object
    lo_closed: bool
    hi_closed: bool

    @property
    def empty(self) -> bool:
        return self.lo > self.hi or (self.lo == self.hi and not (self.lo_closed and self.hi_closed))

    @property
    def point(self) -> bool:
        return self.lo == self.hi and self.lo_closed and self.hi_closed

    def contains(self, d) -> bool:
        above = d > self.lo or (self.lo_closed and d == self.lo)
        below = d < self.hi or (self.hi_closed and d == self.hi)
        return above and below


@dataclass
class StaModel:
    clocks: tuple
    locations: tuple
    edges: tuple
    dists: dict
    initial: tuple
    labels: dict = field(default_factory=dict)
    ap: frozenset = frozenset()
    name: str = "sta"

    def __post_init__(self):
        self.clocks = tuple(self.clocks)
        self.locations = tuple(self.locations)
        self.edges = tuple(self.edges)
        self.labels = {l: frozenset(self.labels.get(l, ())) for l in self.locations}
        used = frozenset().union(*self.labels.values()) if self.labels else frozenset()
        self.ap = frozenset(self.ap) | used
        locs = set(self.locations)
        for e in self.edges:
            if e.source not in locs or e.target not in locs:
                raise InvalidModel(f"edge {e.source}->{e.target} uses an unknown location")
            if e.weight <= 0 or int(e.weight) != e.weight:
                raise InvalidModel(f"edge {e.source}->{e.target} needs a positive integer weight")
            for c in e.guard:
                if c.clock not in self.clocks:
                    raise InvalidModel(f"guard {c} uses unknown clock {c.clock!r}")
            for x in e.resets:
                if x not in self.clocks:
                    raise InvalidModel(f"reset of unknown clock {x!r}")
        for l in self.locations:
            if l not in self.dists:
                raise InvalidModel(f"location {l!r} has no delay distribution")
        loc, val = self.initial
        if loc not in locs or len(val) != len(self.clocks):
            raise InvalidModel("initial configuration does not match the model")
        self.max_const = max((c.const for e in self.edges for c in e.guard), default=0)
        self.out_edges = {l: tuple(e for e in self.edges if e.source == l) for l in self.locations}
        self.clock_index = {x: i for i, x in enumerate(self.clocks)}
        self.loc_index = {l: i for i, l in enumerate(self.locations)}

    def label(self, config) -> frozenset:
        return self.labels[config[0]]

    def edge_delays(self, edge: StaEdge, val) -> DelayInterval:
        """Delays ``d >= 0`` after which ``val + d`` satisfies the guard of ``edge``."""
        lo, lo_c = 0, True
        hi, hi_c = math.inf, False
        for c in edge.guard:
            b = c.const - val[self.clock_index[c.clock]]
            if c.op in (">", ">=", "="):
                closed = c.op != ">"
                if b > lo or (b == lo and not closed):
                    lo, lo_c = b, closed
            if c.op in ("<", "<=", "="):
                closed = c.op != "<"
                if b < hi or (b == hi and not closed):
                    hi, hi_c = b, closed
        return DelayInterval(lo, hi, lo_c, hi_c)

    def enabled(self, config) -> list[tuple[StaEdge, DelayInterval]]:
        loc, val = config
        out = []
        for e in self.out_edges[loc]:
            iv = self.edge_delays(e, val)
            if not iv.empty:
                out.append((e, iv))
        return out

    def apply(self, edge: StaEdge, val, d) -> tuple:
        return tuple(0 if x in edge.resets else v + d for x, v in zip(self.clocks, val))

    def initial_config(self) -> tuple:
        loc, val = self.initial
        return (loc, tuple(val))

    def support_moves(self, config) -> list[tuple[StaEdge, Fraction]]:
        """Pairs ``(edge, d)`` representing every part of the kernel with positive mass.

        Computed on the valuation itself, in exact arithmetic: delays are cut
        at the points where some clock crosses an integer up to ``M + 1``;
        between two cuts nothing observable changes, so one delay per piece
        stands for the whole piece.
        """
        loc, val = config
        val = tuple(Fraction(v) for v in val)
        M = self.max_const
        cuts = {Fraction(0)}
        for v in val:
            for c in range(M + 2):
                if c - v > 0:
                    cuts.add(c - v)
        cuts = sorted(cuts)
        pieces = [(a + b) / 2 for a, b in zip(cuts, cuts[1:])] + [cuts[-1] + 1]
        edges = self.out_edges[loc]

        def firing(d):
            shifted = tuple(v + d for v in val)
            return [e for e in edges
                    if all(c.holds(shifted[self.clock_index[c.clock]]) for c in e.guard)]

        kind = self.dists[loc].kind
        wide = [(e, d) for d in pieces for e in firing(d)]
        if wide:
            if kind == "dirac":
                raise InvalidModel(f"Dirac delay at {loc!r} but the enabling delays have positive length")
            if kind == "uniform" and any(d == pieces[-1] for _, d in wide):
                raise InvalidModel(f"uniform delay at {loc!r} over an unbounded set of delays")
            return wide
        narrow = [(e, d) for d in cuts for e in firing(d)]
        if not narrow:
            raise DeadlockedConfiguration(f"no edge enabled from {loc!r} at any delay")
        return narrow

    def abstract_successors(self, config, alpha) -> set:
        """Images under ``alpha`` of the positive-mass one-step successors of ``config``."""
        loc, val = config
        val = tuple(Fraction(v) for v in val)
        return {alpha((e.target, self.apply(e, val, d))) for e, d in self.support_moves(config)}


def make_sta(clocks, locations, edges, dists, initial, labels=None, name="sta") -> StaModel:
    """Convenience builder taking guards as text and distributions as specs."""
    es = []
    for e in edges:
        if isinstance(e, StaEdge):
            es.append(e)
            continue
        src, guard, resets, tgt, *w = e
        es.append(StaEdge(src, parse_guard(guard), frozenset(resets), tgt, w[0] if w else 1))
    ds = {}
    for l, d in dists.items():
        if isinstance(d, DelayDist):
            ds[l] = d
        elif isinstance(d, str):
            ds[l] = DelayDist(d)
        else:
            ds[l] = DelayDist(d[0], d[1])
    loc, val = initial
    val = tuple(Fraction(v) if isinstance(v, (int, str)) else v for v in val)
    return StaModel(tuple(clocks), tuple(locations), tuple(es), ds, (loc, val), labels or {}, name=name)
