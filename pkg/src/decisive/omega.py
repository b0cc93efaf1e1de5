"""Deterministic Muller automata and the product with a labelled chain."""

from __future__ import annotations

import itertools
import logging
from collections.abc import Iterable
from fractions import Fraction

from .core import (
    MarkovChain,
    SparseDistribution,
    as_distribution,
    explore,
    exact_reachability_finite,
    sorted_states,
)
from .errors import (
    AlphabetMismatch,
    IncompleteAutomaton,
    InvalidModel,
    NondeterministicAutomaton,
    UnknownState,
)

log = logging.getLogger(__name__)

SINK = "_sink"


def letters(ap: Iterable) -> list[frozenset]:
    """All subsets of ``ap`` in a fixed order."""
    ap = sorted(ap)
    out = []
    for r in range(len(ap) + 1):
        out.extend(frozenset(c) for c in itertools.combinations(ap, r))
    return out


class MullerAutomaton:
    """Deterministic complete automaton over ``2^AP`` with a Muller family.

    ``edges`` are triples ``(q, letter, q')`` where ``letter`` is the exact
    set of propositions read.  With ``complete=True`` missing edges are sent
    to a fresh rejecting sink location instead of raising.
    """

    def __init__(self, locations: Iterable, initial, edges: Iterable, muller: Iterable,
                 ap: Iterable, complete: bool = False):
        self.ap = frozenset(ap)
        self.locations = tuple(sorted_states(set(locations)))
        if initial not in self.locations:
            raise InvalidModel(f"initial location {initial!r} is not a location")
        self.initial = initial
        delta: dict = {}
        for q, letter, q2 in edges:
            letter = frozenset(letter)
            if q not in self.locations or q2 not in self.locations:
                raise InvalidModel(f"edge ({q!r}, {sorted(letter)}, {q2!r}) uses an unknown location")
            if not letter <= self.ap:
                raise InvalidModel(f"edge label {sorted(letter)} is not a subset of the alphabet")
            old = delta.get((q, letter))
            if old is not None and old != q2:
                raise NondeterministicAutomaton(
                    f"location {q!r} has two successors on {sorted(letter)}: {old!r} and {q2!r}")
            delta[(q, letter)] = q2
        missing = [(q, u) for q in self.locations for u in letters(self.ap) if (q, u) not in delta]
        if missing:
            if not complete:
                q, u = missing[0]
                raise IncompleteAutomaton(
                    f"no edge from {q!r} on {sorted(u)} ({len(missing)} missing in total)")
            if SINK in self.locations:
                raise InvalidModel(f"location name {SINK!r} is reserved for the sink")
            self.locations = self.locations + (SINK,)
            for q, u in missing:
                delta[(q, u)] = SINK
            for u in letters(self.ap):
                delta[(SINK, u)] = SINK
            log.info("completed automaton with a rejecting sink (%d edges added)", len(missing))
        self._delta = delta
        family = set()
        for acc in muller:
            acc = frozenset(acc)
            if not acc <= set(self.locations):
                raise InvalidModel(f"Muller set {sorted(acc)} mentions unknown locations")
            family.add(acc)
        self.muller = frozenset(family)

    def step(self, q, letter) -> object:
        return self._delta[(q, frozenset(letter))]

    def accepts(self, inf_set) -> bool:
        return frozenset(inf_set) in self.muller

    def edges(self) -> list[tuple]:
        return [(q, u, self._delta[(q, u)]) for q in self.locations for u in letters(self.ap)
                if (q, u) in self._delta]

    def with_muller(self, muller: Iterable) -> MullerAutomaton:
        return MullerAutomaton(self.locations, self.initial, self.edges(), muller, self.ap)

    def __repr__(self):
        return f"MullerAutomaton({len(self.locations)} locations, {len(self.muller)} accepting sets)"


class ProductChain(MarkovChain):
    """The chain over pairs ``(s, q)``; the automaton reads the label of ``s``.

    A pair is labelled by its automaton location, so runs of the product
    satisfy the Muller condition when ``Inf`` of that labelling is in the
    family.
    """

    def __init__(self, base: MarkovChain, dma: MullerAutomaton):
        if base.ap != dma.ap:
            raise AlphabetMismatch(
                f"chain propositions {sorted(base.ap)} differ from automaton alphabet {sorted(dma.ap)}")
        self.base = base
        self.dma = dma
        self.ap = frozenset(dma.locations)
        self.exact = base.exact
        self.is_finite = base.is_finite
        self.name = f"{base.name or 'chain'} x automaton"
        self._cache: dict = {}

    @property
    def states(self) -> tuple:
        return tuple((s, q) for s in self.base.states for q in self.dma.locations)

    def successors(self, pair) -> SparseDistribution:
        try:
            return self._cache[pair]
        except KeyError:
            pass
        s, q = pair
        if q not in self.dma.locations:
            raise UnknownState(pair)
        row = self.base.successors(s)
        q2 = self.dma.step(q, self.base.label(s))
        dist = SparseDistribution({(t, q2): w for t, w in row.items()}, exact=row.exact,
                                  check=False)
        self._cache[pair] = dist
        return dist

    def label(self, pair) -> frozenset:
        return frozenset([pair[1]])

    def has_state(self, pair) -> bool:
        return (isinstance(pair, tuple) and len(pair) == 2 and pair[1] in self.dma.locations
                and self.base.has_state(pair[0]))

    def __repr__(self):
        return f"ProductChain({self.base!r}, {self.dma!r})"


def product(chain: MarkovChain, dma: MullerAutomaton) -> ProductChain:
    return ProductChain(chain, dma)


def lift_initial(mu, dma: MullerAutomaton) -> SparseDistribution:
    mu = as_distribution(mu)
    return SparseDistribution({(s, dma.initial): p for s, p in mu.items()}, exact=mu.exact,
                              check=False)


def muller_probability_exact(prod: ProductChain, mu) -> Fraction | float:
    """Probability that ``Inf`` of the automaton locations lies in the Muller family.

    Finite products only: the reachable part is decomposed into bottom
    strongly connected components, each of which is visited forever with
    its own location set once entered.
    """
    from .qualitative import bsccs

    if not prod.is_finite:
        raise TypeError("the exact Muller probability needs a finite product")
    mu = as_distribution(mu)
    reach = list(explore(prod, mu.support()))
    good = set()
    for C in bsccs(prod, states=reach):
        if prod.dma.accepts({q for _, q in C}):
            good |= C
    zero = Fraction(0) if (prod.exact and mu.exact) else 0.0
    if not good:
        return zero
    x = exact_reachability_finite(prod, good, states=reach)
    return sum((p * x[s] for s, p in mu.items()), zero)
