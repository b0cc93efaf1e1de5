"""Thick graph of an STA: the finite region-level chain and its abstraction map."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ..abstraction import AlphaMap
from ..core import FiniteChain
from ..errors import DeadlockedConfiguration, InvalidModel
from . import regions as R
from .model import StaEdge, StaModel


@dataclass(frozen=True)
class DelayMove:
    """One way to leave a state: a delay region and an edge enabled there."""

    delay_region: R.Region
    edge: StaEdge
    target: tuple


def delay_moves(sta: StaModel, loc: str, r: R.Region) -> tuple[list[DelayMove], bool]:
    """Moves out of ``(loc, r)`` carrying positive kernel mass, and whether they are punctual.

    Delay regions of positive length win; punctual ones count only when no
    positive-length delay region enables an edge.
    """
    M = sta.max_const
    wide, narrow = [], []
    for rd in R.delay_regions(r, M):
        for e in sta.out_edges[loc]:
            if R.satisfies(e.guard, sta.clocks, rd, M):
                idx = [sta.clock_index[x] for x in e.resets]
                move = DelayMove(rd, e, (e.target, R.reset(rd, idx, M)))
                (narrow if rd.punctual else wide).append(move)
    kind = sta.dists[loc].kind
    if wide:
        if kind == "dirac":
            raise InvalidModel(f"Dirac delay at {loc!r} but the enabling delays have positive length")
        if kind == "uniform" and any(m.delay_region.unbounded for m in wide):
            raise InvalidModel(f"uniform delay at {loc!r} over an unbounded set of delays")
        return wide, False
    if narrow:
        return narrow, True
    raise DeadlockedConfiguration(f"no edge can ever fire from {loc!r} in region {r}")


class RegionMap(AlphaMap):
    """``(loc, valuation) -> (loc, region)``; fibers are random points of each region."""

    def __init__(self, sta: StaModel, samples: int = 4, seed: int = 0):
        self.sta = sta
        self.samples = samples
        self.seed = seed
        M = sta.max_const
        super().__init__(lambda c: (c[0], R.region_of(c[1], M)), self._fiber_points,
                         name="sta-thick-graph")

    def _fiber_points(self, a):
        loc, r = a
        rng = np.random.default_rng([self.seed, r.code(self.sta.max_const)])
        M = self.sta.max_const
        yield (loc, R.representative(r, M))
        for _ in range(self.samples):
            yield (loc, R.sample_point(r, M, rng))

    def lift_to_product(self, dma) -> ProductRegionMap:
        return ProductRegionMap(self)


class ProductRegionMap(AlphaMap):
    """``((loc, valuation), q) -> ((loc, region), q)``."""

    def __init__(self, base: RegionMap):
        self.base = base
        super().__init__(lambda p: (base(p[0]), p[1]),
                         lambda a: ((c, a[1]) for c in base.fiber(a[0])),
                         name="sta-thick-graph x id")


@dataclass
class ThickGraph:
    sta: StaModel
    chain: FiniteChain
    initial: tuple
    moves: dict = field(repr=False, default_factory=dict)
    punctual: dict = field(repr=False, default_factory=dict)

    @property
    def states(self) -> tuple:
        return self.chain.states

    def alpha(self, samples: int = 4, seed: int = 0) -> RegionMap:
        return RegionMap(self.sta, samples, seed)

    def name_of(self, s) -> str:
        loc, r = s
        return f"({loc}, {r.describe(self.sta.clocks, self.sta.max_const)})"

    def to_dict(self) -> dict:
        from ..report import number

        return {"initial": self.name_of(self.initial),
                "states": [self.name_of(s) for s in self.states],
                "edges": [{"from": self.name_of(s), "to": self.name_of(t), "prob": number(p)}
                          for s in self.states for t, p in self.chain.successors(s).items()]}

    def to_dot(self) -> str:
        ids = {s: f"n{i}" for i, s in enumerate(self.states)}
        lines = ["digraph thick_graph {", "  rankdir=LR;"]
        for s in self.states:
            shape = "doublecircle" if s == self.initial else "ellipse"
            label = self.name_of(s).replace('"', '\\"')
            lines.append(f'  {ids[s]} [label="{label}", shape={shape}];')
        for s in self.states:
            for t, p in self.chain.successors(s).items():
                lines.append(f'  {ids[s]} -> {ids[t]} [label="{p}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def thick_graph(sta: StaModel, roots=()) -> ThickGraph:
    """The part of the thick graph reachable from the initial configuration and ``roots``."""
    M = sta.max_const
    loc0, val0 = sta.initial_config()
    init = (loc0, R.region_of(val0, M))
    starts = [init] + [(l, R.region_of(tuple(v), M)) for l, v in roots]
    rows, moves, punct = {}, {}, {}
    queue = deque(dict.fromkeys(starts))
    seen = set(queue)
    while queue:
        s = queue.popleft()
        ms, is_punct = delay_moves(sta, *s)
        succ = sorted({m.target for m in ms}, key=lambda t: (t[0], t[1].sort_key()))
        w = Fraction(1, len(succ))
        rows[s] = {t: w for t in succ}
        moves[s] = ms
        punct[s] = is_punct
        for t in succ:
            if t not in seen:
                seen.add(t)
                queue.append(t)
    labels = {s: sta.labels[s[0]] for s in rows}
    chain = FiniteChain(rows, labels=labels, ap=sta.ap, name=f"thick graph of {sta.name}")
    return ThickGraph(sta, chain, init, moves, punct)
