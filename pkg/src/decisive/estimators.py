"""Engines behind the approximation schemes.

An estimator turns ``(mu, yes-set, no-set)`` into the sequence, indexed by
the horizon ``n``, of the probability mass absorbed in each set within
``n`` steps.  Mass is absorbed at the first visit to either set, so a
single forward frontier gives every term of the sequence.

``ExactEstimator`` propagates the distribution itself (rationals or floats).
``MonteCarloEstimator`` runs a batch of simulated paths step by step and
reports empirical frequencies together with a Hoeffding half-width.
"""

from __future__ import annotations

import logging
import math
from bisect import bisect_right
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import reduce
from typing import Iterator

import numpy as np

from .core import (
    PRUNE_BELOW,
    MarkovChain,
    StateSet,
    as_distribution,
    as_stateset,
)
from .evidence import Evidence
from .omega import MullerAutomaton, lift_initial, product

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TimeInterval:
    """A bounded interval of time points with open or closed ends."""

    lo: float | Fraction
    hi: float | Fraction
    lo_closed: bool = True
    hi_closed: bool = True

    @classmethod
    def parse(cls, text: str) -> TimeInterval:
        text = text.strip()
        if len(text) < 5 or text[0] not in "[(" or text[-1] not in "])":
            raise ValueError(f"cannot parse interval {text!r}; expected e.g. [0,1] or (0,2]")
        lo, hi = text[1:-1].split(",")
        return cls(Fraction(lo.strip()), Fraction(hi.strip()), text[0] == "[", text[-1] == "]")

    @property
    def empty(self) -> bool:
        return self.lo > self.hi or (self.lo == self.hi and not (self.lo_closed and self.hi_closed))

    def contains(self, t):
        """Membership; works elementwise on numpy arrays."""
        lo, hi = self.lo, self.hi
        if isinstance(t, np.ndarray):
            lo, hi = float(lo), float(hi)
        above = (t >= lo) if self.lo_closed else (t > lo)
        below = (t <= hi) if self.hi_closed else (t < hi)
        return above & below

    def __str__(self):
        return f"{'[' if self.lo_closed else '('}{self.lo},{self.hi}{']' if self.hi_closed else ')'}"


@dataclass(frozen=True)
class TimeWindow:
    """Target times and the horizon past which runs count as failed."""

    interval: TimeInterval
    delta: float | Fraction


@dataclass(frozen=True)
class EscapeBound:
    """States from which the target probability is known to be at most ``bound``.

    Paths entering ``region`` are stopped and contribute ``bound`` to the
    upper estimate instead of 1.  Used to certify that a probability is
    below 1 for chains that are not decisive.
    """

    region: StateSet
    bound: float
    note: str = ""


@dataclass
class Masses:
    yes: object
    no: object
    escape: object
    groups: tuple = ()


@dataclass
class ScaledMasses:
    """Exact masses as integer numerators over one shared denominator."""

    yes: int
    no: int
    escape: int
    groups: tuple
    scale: int

    def fraction(self, num: int) -> Fraction:
        return Fraction(num, self.scale)


class UnreducedFraction(Fraction):
    """``n/d`` kept as given until its numerator or denominator is read.

    Long exact runs produce numbers with many thousand bits, where one gcd
    costs far more than a whole propagation step.  Comparisons cross-multiply
    and need no gcd; anything that reads the parts gets lowest terms.
    """

    __slots__ = ("_reduced",)

    def __new__(cls, numerator: int, denominator: int):
        self = object.__new__(cls)
        self._numerator, self._denominator = numerator, denominator
        self._reduced = False
        return self

    def _reduce(self):
        if not self._reduced:
            g = math.gcd(self._numerator, self._denominator)
            self._numerator //= g
            self._denominator //= g
            self._reduced = True
        return self

    @property
    def numerator(self):
        return self._reduce()._numerator

    @property
    def denominator(self):
        return self._reduce()._denominator

    def _richcmp(self, other, op):
        if isinstance(other, Fraction):
            return op(self._numerator * other._denominator, other._numerator * self._denominator)
        return super()._richcmp(other, op)

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            return self._richcmp(Fraction(other) if isinstance(other, int) else other,
                                 lambda x, y: x == y)
        return super().__eq__(other)

    def __hash__(self):
        self._reduce()
        return super().__hash__()

    def __repr__(self):
        self._reduce()
        return f"Fraction({self._numerator}, {self._denominator})"

    def __str__(self):
        self._reduce()
        return super().__str__()

    def __reduce__(self):
        return (Fraction, (self.numerator, self.denominator))


def hoeffding(samples: int, delta: float) -> float:
    return math.sqrt(math.log(2.0 / delta) / (2.0 * samples))


class ExactEstimator:
    """Forward propagation of the undecided mass.

    In exact mode the frontier is kept as integers over a common
    denominator, which avoids a gcd per addition.
    """

    slack = 0
    sampling = None

    def __init__(self, chain: MarkovChain, exact: bool | None = None):
        self.chain = chain
        self.exact = chain.exact if exact is None else (exact and chain.exact)
        self._int_rows: dict = {}

    def for_product(self, dma: MullerAutomaton) -> ExactEstimator:
        return ExactEstimator(product(self.chain, dma), exact=self.exact)

    def lift(self, mu, dma: MullerAutomaton):
        return lift_initial(mu, dma)

    def time_evidence(self) -> Evidence:
        return Evidence.non_zeno("time advances by one per step", declared=False)

    def _int_row(self, s):
        row = self._int_rows.get(s)
        if row is None:
            dist = self.chain.successors(s)
            den = reduce(math.lcm, (Fraction(w).denominator for w in dist.values()), 1)
            row = (den, [(t, int(Fraction(w) * den)) for t, w in dist.items()])
            self._int_rows[s] = row
        return row

    def propagate(self, mu, yes, no, *, escape: EscapeBound | None = None,
                  window: TimeWindow | None = None, groups=()) -> Iterator[Masses]:
        mu = as_distribution(mu)
        yes, no = as_stateset(yes), as_stateset(no)
        groups = [as_stateset(g) for g in groups]
        if self.exact and mu.exact:
            yield from self._propagate_exact(mu, yes, no, escape, window, groups)
        else:
            yield from self._propagate_float(mu, yes, no, escape, window, groups)

    @staticmethod
    def _classify(s, n, yes, no, escape, window):
        if s in yes and (window is None or window.interval.contains(n)):
            return 1
        if s in no or (window is not None and n > window.delta):
            return 2
        if escape is not None and s in escape.region:
            return 3
        return 0

    @staticmethod
    def _group_of(s, groups):
        for i, g in enumerate(groups):
            if s in g:
                return i
        return None

    def _propagate_exact(self, mu, yes, no, escape, window, groups):
        scale = reduce(math.lcm, (p.denominator for p in mu.values()), 1)
        frontier = {s: int(p * scale) for s, p in mu.items()}
        acc = [0, 0, 0]
        gacc = [0] * len(groups)
        n = 0
        while True:
            keep = {}
            for s, w in frontier.items():
                c = self._classify(s, n, yes, no, escape, window)
                if c == 0:
                    keep[s] = w
                    continue
                acc[c - 1] += w
                if c == 1 and groups:
                    g = self._group_of(s, groups)
                    if g is not None:
                        gacc[g] += w
            yield ScaledMasses(acc[0], acc[1], acc[2], tuple(gacc), scale)
            if not keep:
                frontier = {}
                n += 1
                continue
            rows = {s: self._int_row(s) for s in keep}
            step_den = reduce(math.lcm, (den for den, _ in rows.values()), 1)
            nxt: dict = {}
            for s, w in keep.items():
                den, entries = rows[s]
                factor = w * (step_den // den)
                for t, c in entries:
                    nxt[t] = nxt.get(t, 0) + factor * c
            scale *= step_den
            acc = [a * step_den for a in acc]
            gacc = [a * step_den for a in gacc]
            frontier = nxt
            n += 1

    def _propagate_float(self, mu, yes, no, escape, window, groups):
        frontier = {s: float(p) for s, p in mu.items()}
        acc = [0.0, 0.0, 0.0]
        gacc = [0.0] * len(groups)
        pruned = 0.0
        n = 0
        while True:
            keep = {}
            for s, w in frontier.items():
                c = self._classify(s, n, yes, no, escape, window)
                if c == 0:
                    keep[s] = w
                    continue
                acc[c - 1] += w
                if c == 1 and groups:
                    g = self._group_of(s, groups)
                    if g is not None:
                        gacc[g] += w
            yield Masses(acc[0], acc[1], acc[2], tuple(gacc))
            nxt: dict = {}
            for s, w in keep.items():
                for t, p in self.chain.successors(s).items():
                    nxt[t] = nxt.get(t, 0.0) + w * float(p)
            small = [t for t, w in nxt.items() if w < PRUNE_BELOW]
            if small:
                lost = sum(nxt.pop(t) for t in small)
                pruned += lost
                log.debug("step %d: pruned %d entries, mass %.3g (kept in the gap)", n, len(small), lost)
            frontier = nxt
            n += 1


class ChainSimulator:
    """Path sampler for a Markov chain; one Python-level step per path."""

    def __init__(self, chain: MarkovChain):
        self.chain = chain
        self._rows: dict = {}

    def for_product(self, dma: MullerAutomaton) -> ChainSimulator:
        return ChainSimulator(product(self.chain, dma))

    def lift(self, mu, dma):
        return lift_initial(mu, dma)

    def time_evidence(self) -> Evidence:
        return Evidence.non_zeno("time advances by one per step", declared=False)

    def _row(self, s):
        row = self._rows.get(s)
        if row is None:
            dist = self.chain.successors(s)
            targets = list(dist)
            cum = np.cumsum([float(w) for w in dist.values()])
            cum /= cum[-1]
            row = (targets, cum.tolist())
            self._rows[s] = row
        return row

    def start(self, mu, size: int, rng: np.random.Generator) -> dict:
        mu = as_distribution(mu)
        atoms = list(mu)
        cum = np.cumsum([float(w) for w in mu.values()])
        cum /= cum[-1]
        idx = np.searchsorted(cum, rng.random(size), side="right")
        idx = np.minimum(idx, len(atoms) - 1)
        return {"states": [atoms[i] for i in idx], "steps": 0}

    def size(self, batch) -> int:
        return len(batch["states"])

    def take(self, batch, mask) -> dict:
        states = batch["states"]
        return {"states": [s for s, m in zip(states, mask) if m], "steps": batch["steps"]}

    def member(self, batch, A) -> np.ndarray:
        return np.fromiter((s in A for s in batch["states"]), dtype=bool, count=len(batch["states"]))

    def times(self, batch):
        return batch["steps"]

    def advance(self, batch, rng: np.random.Generator) -> dict:
        states = batch["states"]
        u = rng.random(len(states))
        out = []
        for s, x in zip(states, u):
            targets, cum = self._row(s)
            i = bisect_right(cum, x)
            out.append(targets[min(i, len(targets) - 1)])
        return {"states": out, "steps": batch["steps"] + 1}


def _stream(seed: int, worker: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, worker])))


class _Walker:
    """One worker's share of the sample paths."""

    def __init__(self, sim, mu, size, rng):
        self.sim = sim
        self.rng = rng
        self.batch = sim.start(mu, size, rng)
        self.counts = np.zeros(3, dtype=np.int64)
        self.gcounts = None

    def classify(self, n, yes, no, escape, window, groups):
        sim, batch = self.sim, self.batch
        if self.gcounts is None:
            self.gcounts = np.zeros(len(groups), dtype=np.int64)
        m = sim.size(batch)
        if m == 0:
            return
        is_yes = sim.member(batch, yes)
        if window is not None:
            t = sim.times(batch)
            is_yes &= window.interval.contains(t)
            late = t > (float(window.delta) if isinstance(t, np.ndarray) else window.delta)
        is_no = ~is_yes & sim.member(batch, no)
        if window is not None:
            is_no |= ~is_yes & late
        is_esc = np.zeros(m, dtype=bool)
        if escape is not None:
            is_esc = ~is_yes & ~is_no & sim.member(batch, escape.region)
        self.counts += [is_yes.sum(), is_no.sum(), is_esc.sum()]
        if len(groups) and is_yes.any():
            sub = sim.take(batch, is_yes)
            left = np.ones(sim.size(sub), dtype=bool)
            for i, g in enumerate(groups):
                hit = left & sim.member(sub, g)
                self.gcounts[i] += hit.sum()
                left &= ~hit
        decided = is_yes | is_no | is_esc
        if decided.any():
            self.batch = sim.take(batch, ~decided)

    def advance(self):
        if self.sim.size(self.batch):
            self.batch = self.sim.advance(self.batch, self.rng)


@dataclass
class MonteCarloEstimator:
    """Statistical estimator with per-worker reproducible random streams.

    Samples are split across ``workers`` fixed shares, each driven by its own
    Philox stream keyed on ``(seed, worker)``; results depend on the seed and
    the worker count only.  ``threads`` controls how many shares run at once.
    """

    simulator: object
    samples: int = 10_000
    confidence: float = 0.99
    seed: int = 0
    workers: int = 1
    threads: int = 1

    @property
    def slack(self) -> float:
        return hoeffding(self.samples, 1.0 - self.confidence)

    @property
    def sampling(self) -> dict:
        return {"samples": self.samples, "confidence": self.confidence, "seed": self.seed,
                "workers": self.workers, "halfwidth": self.slack}

    def with_samples(self, samples: int) -> MonteCarloEstimator:
        return replace(self, samples=samples)

    def for_product(self, dma: MullerAutomaton) -> MonteCarloEstimator:
        return replace(self, simulator=self.simulator.for_product(dma))

    def lift(self, mu, dma):
        return self.simulator.lift(mu, dma)

    def time_evidence(self) -> Evidence:
        return self.simulator.time_evidence()

    def _shares(self) -> list[int]:
        w = max(1, self.workers)
        base, extra = divmod(self.samples, w)
        return [base + (1 if i < extra else 0) for i in range(w)]

    def propagate(self, mu, yes, no, *, escape: EscapeBound | None = None,
                  window: TimeWindow | None = None, groups=()) -> Iterator[Masses]:
        yes, no = as_stateset(yes), as_stateset(no)
        groups = [as_stateset(g) for g in groups]
        walkers = [_Walker(self.simulator, mu, k, _stream(self.seed, i))
                   for i, k in enumerate(self._shares()) if k > 0]
        total = float(self.samples)
        pool = ThreadPoolExecutor(self.threads) if self.threads > 1 and len(walkers) > 1 else None
        try:
            n = 0
            while True:
                for wk in walkers:
                    wk.classify(n, yes, no, escape, window, groups)
                counts = sum(wk.counts for wk in walkers)
                gcounts = (sum(wk.gcounts for wk in walkers) if groups
                           else np.zeros(0, dtype=np.int64))
                yield Masses(counts[0] / total, counts[1] / total, counts[2] / total,
                             tuple(float(g) / total for g in gcounts))
                if pool is None:
                    for wk in walkers:
                        wk.advance()
                else:
                    list(pool.map(lambda wk: wk.advance(), walkers))
                n += 1
        finally:
            if pool is not None:
                pool.shutdown()
