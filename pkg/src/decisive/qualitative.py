"""Avoid-sets, attractors, bottom components and qualitative verdicts."""

from __future__ import annotations

import logging
from collections import deque
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from enum import Enum

from .core import (
    MarkovChain,
    StateSet,
    all_states,
    as_distribution,
    as_stateset,
    can_reach,
    explore,
    order_key,
    sorted_states,
)
from .errors import CertificateRequired, EvidenceError, Refusal, SinkViolation, UnresolvableSet
from .evidence import Evidence, EvidenceKind
from .omega import MullerAutomaton, ProductChain, lift_initial, product

log = logging.getLogger(__name__)


class Provenance(str, Enum):
    EXACT = "ExactFiniteGraph"
    BOUNDED = "BoundedExploration"
    USER = "UserSupplied"


class AvoidSet(StateSet):
    """States from which the target is reached with probability zero."""

    __slots__ = ("provenance", "target")

    def __init__(self, members=None, test=None, depth=None, provenance=Provenance.EXACT,
                 target=None, name=None):
        super().__init__(members=members, test=test, depth=depth, name=name)
        self.provenance = provenance
        self.target = target

    def __repr__(self):
        return f"AvoidSet[{self.provenance.value}]({super().__repr__()})"


def _explored_can_reach(chain, explored: Mapping, targets, depth) -> set:
    """Backward closure of ``targets`` inside an explored region."""
    pred: dict = {s: set() for s in explored}
    for s, d in explored.items():
        if depth is not None and d >= depth:
            continue
        for t in chain.successors(s):
            if t in pred:
                pred[t].add(s)
    good = {s for s in explored if s in targets}
    queue = deque(good)
    while queue:
        t = queue.popleft()
        for s in pred[t]:
            if s not in good:
                good.add(s)
                queue.append(s)
    return good


def avoid_set(chain: MarkovChain, B, *, roots: Iterable | None = None,
              depth: int | None = None) -> AvoidSet:
    """The avoid-set of ``B``.

    Finite chains get the exact set.  Countable chains need a closure
    certificate: a depth (argument or ``B.depth``) and the roots of the
    exploration.  Membership outside the explored region is then refused.
    """
    B = as_stateset(B)
    if chain.is_finite:
        states = all_states(chain)
        reach = can_reach(chain, B, states)
        return AvoidSet(members=[s for s in states if s not in reach], target=B)
    depth = depth if depth is not None else B.depth
    if depth is None or roots is None:
        raise CertificateRequired(
            "avoid-set of an infinite chain needs a closure certificate (roots and depth)")
    explored = explore(chain, roots, depth=depth)
    reach = _explored_can_reach(chain, explored, B, depth)

    def test(s):
        if s not in explored:
            raise UnresolvableSet(f"{s!r} lies outside the certified exploration depth {depth}")
        if s in reach:
            return False
        if explored[s] >= depth:
            raise UnresolvableSet(f"{s!r} sits on the exploration frontier (depth {depth})")
        return True

    return AvoidSet(test=test, depth=depth, provenance=Provenance.BOUNDED, target=B)


def supplied_avoid_set(chain: MarkovChain, states, B, *, roots: Iterable = (),
                       depth: int = 0) -> AvoidSet:
    """Wrap a user-provided avoid-set after checking it near ``roots``.

    The sink property and disjointness from ``B`` are checked on every state
    within ``depth`` steps of ``roots``.
    """
    S = as_stateset(states)
    B = as_stateset(B)
    for s in explore(chain, roots, depth=depth):
        if s in S:
            if s in B:
                raise SinkViolation(f"supplied avoid-set contains target state {s!r}")
            for t in chain.successors(s):
                if t not in S:
                    raise SinkViolation(f"supplied avoid-set is not closed: {s!r} -> {t!r}")
    if S.is_explicit:
        return AvoidSet(members=S.members, provenance=Provenance.USER, target=B)
    return AvoidSet(test=S.__contains__, depth=S.depth, provenance=Provenance.USER, target=B)


def double_avoid_set(chain: MarkovChain, B, *, roots=None, depth=None) -> AvoidSet:
    first = avoid_set(chain, B, roots=roots, depth=depth)
    return avoid_set(chain, first, roots=roots, depth=depth)


def check_sink(chain: MarkovChain, A, states: Iterable) -> list:
    """Pairs ``(s, t)`` with ``s`` in ``A``, ``t`` a successor outside ``A``."""
    A = as_stateset(A)
    return [(s, t) for s in states if s in A for t in chain.successors(s) if t not in A]


def is_attractor(chain: MarkovChain, A, mu=None, *, depth: int | None = None) -> bool:
    """Whether ``A`` is reached almost surely, from ``mu`` or from every state."""
    A = as_stateset(A)
    if chain.is_finite:
        roots = as_distribution(mu).support() if mu is not None else all_states(chain)
        region = explore(chain, roots, stop=A)
        reach = can_reach(chain, A)
        return all(s in reach for s in region)
    depth = depth if depth is not None else A.depth
    if depth is None or mu is None:
        raise CertificateRequired("attractor check on an infinite chain needs mu and a depth")
    explored = explore(chain, as_distribution(mu).support(), depth=depth, stop=A)
    reach = _explored_can_reach(chain, explored, A, depth)
    inner = [s for s, d in explored.items() if d < depth]
    ok = all(s in reach for s in inner)
    if ok:
        log.warning("attractor %r passed the bounded necessary check only; "
                    "sufficiency on the infinite chain is the caller's obligation", A)
    return ok


def _tarjan(nodes: list, adj: Mapping) -> list[frozenset]:
    index: dict = {}
    low: dict = {}
    on_stack: set = set()
    stack: list = []
    out: list = []
    counter = 0
    for root in nodes:
        if root in index:
            continue
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        work = [(root, iter(adj[root]))]
        while work:
            v, it = work[-1]
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(adj[w])))
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            else:
                work.pop()
                if work:
                    u = work[-1][0]
                    low[u] = min(low[u], low[v])
                if low[v] == index[v]:
                    comp = set()
                    while True:
                        w = stack.pop()
                        on_stack.discard(w)
                        comp.add(w)
                        if w == v:
                            break
                    out.append(frozenset(comp))
    return out


def sccs(adj: Mapping) -> list[frozenset]:
    nodes = sorted_states(adj)
    return _tarjan(nodes, adj)


def bsccs(chain_or_graph, states: Iterable | None = None) -> list[frozenset]:
    """Bottom strongly connected components, ordered by their least state.

    Accepts a finite chain (optionally restricted to a successor-closed set of
    ``states``) or an adjacency mapping ``{v: successors}``.
    """
    if isinstance(chain_or_graph, Mapping):
        adj = {v: sorted_states(ws) for v, ws in chain_or_graph.items()}
    else:
        chain = chain_or_graph
        states = list(states) if states is not None else list(all_states(chain))
        keep = set(states)
        adj = {s: [t for t in chain.successors(s) if t in keep] for s in states}
    comps = sccs(adj)
    bottom = [C for C in comps if all(w in C for v in C for w in adj[v])]
    return sorted(bottom, key=lambda C: min(order_key(s) for s in C))


@dataclass
class AttractorGraph:
    """Reachability graph over the states of a finite attractor of a product."""

    vertices: tuple
    edges: dict
    components: list
    recurring: list
    reach: list = field(repr=False, default_factory=list)
    depth: int | None = None

    def good(self, family) -> list[int]:
        family = _family(family)
        return [i for i, F in enumerate(self.recurring) if F in family]

    def to_dict(self, family=None) -> dict:
        good = set(self.good(family)) if family is not None else set()
        return {
            "vertices": [repr(v) for v in self.vertices],
            "edges": [[repr(v), repr(w)] for v in self.vertices for w in sorted_states(self.edges[v])],
            "bsccs": [
                {"states": [repr(s) for s in sorted_states(C)],
                 "recurring": [repr(q) for q in sorted_states(self.recurring[i])],
                 "good": i in good}
                for i, C in enumerate(self.components)],
        }

    def to_dot(self, family=None) -> str:
        good = set(self.good(family)) if family is not None else set()
        comp_of = {s: i for i, C in enumerate(self.components) for s in C}
        lines = ["digraph attractor {", "  rankdir=LR;"]
        ids = {v: f"v{i}" for i, v in enumerate(self.vertices)}
        for v in self.vertices:
            attrs = [f'label="{_dot_escape(repr(v))}"']
            i = comp_of.get(v)
            if i is not None:
                attrs.append("style=filled")
                attrs.append('fillcolor="palegreen"' if i in good else 'fillcolor="lightpink"')
            lines.append(f"  {ids[v]} [{', '.join(attrs)}];")
        for v in self.vertices:
            for w in sorted_states(self.edges[v]):
                lines.append(f"  {ids[v]} -> {ids[w]};")
        lines.append("}")
        return "\n".join(lines) + "\n"


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def _family(F) -> frozenset:
    if isinstance(F, MullerAutomaton):
        return F.muller
    return frozenset(frozenset(x) for x in F)


def attractor_graph(prod: ProductChain, B, *, mu=None, depth: int | None = None,
                    verify: bool = True) -> AttractorGraph:
    """Graph over the finite attractor ``B`` with an edge when a path exists.

    ``recurring[i]`` is the set of automaton locations reachable from the
    i-th bottom component.  Infinite products need a depth certificate
    bounding the reachability searches.
    """
    B = as_stateset(B)
    if not B.is_explicit:
        raise TypeError("the attractor must be an explicit finite set")
    vertices = tuple(B.states())
    if prod.is_finite:
        if verify and not is_attractor(prod, B, mu):
            raise Refusal(f"{B!r} is not an attractor of the product")
        search_depth = None
    else:
        search_depth = depth if depth is not None else B.depth
        if search_depth is None:
            raise CertificateRequired("attractor graph of an infinite product needs a depth")
        if verify:
            log.warning("attractor property of %r on an infinite product is taken as declared", B)
    reach_of = {v: frozenset(explore(prod, [v], depth=search_depth)) for v in vertices}
    edges = {v: frozenset(w for w in vertices if w in reach_of[v]) for v in vertices}
    components = bsccs(edges)
    recurring, reach = [], []
    for C in components:
        r = reach_of[min(C, key=order_key)]
        reach.append(r)
        recurring.append(frozenset(q for _, q in r))
    return AttractorGraph(vertices, edges, components, recurring, reach, search_depth)


def good_bsccs(graph: AttractorGraph, F) -> list[frozenset]:
    """Components whose recurring location set belongs to the Muller family."""
    return [graph.components[i] for i in graph.good(F)]


def is_good_by_definition(graph: AttractorGraph, index: int, F) -> bool:
    """Literal check of the two conditions defining a good component.

    Some accepting set must contain every location reachable from the
    component, and each of its locations must be reachable from it.
    """
    reach = graph.reach[index]
    for acc in _family(F):
        cond_a = all(q in acc for _, q in reach)
        cond_b = all(any(q2 == q for _, q2 in reach) for q in acc)
        if cond_a and cond_b:
            return True
    return False


class Qual(str, Enum):
    ALMOST_SURE = "AlmostSure"
    POSITIVE = "Positive"
    ZERO = "Zero"


@dataclass
class Verdict:
    value: object
    prop: str
    evidence: Evidence
    notes: tuple = ()

    @property
    def tainted(self) -> bool:
        return self.evidence.tainted

    def to_dict(self) -> dict:
        value = self.value.value if isinstance(self.value, Enum) else self.value
        return {"property": self.prop, "verdict": value, "tainted": self.tainted,
                "evidence": self.evidence.to_dict(), "notes": list(self.notes)}


def default_evidence(chain: MarkovChain, evidence: Evidence | None) -> Evidence:
    if evidence is not None:
        if evidence.tainted:
            log.warning("result rests on assumed evidence: %s", evidence.note)
        return evidence
    if chain.is_finite:
        return Evidence.finite_chain()
    raise EvidenceError("decisiveness evidence is required for infinite chains")


def attractor_evidence(chain: MarkovChain, A, mu=None, *, depth: int | None = None,
                       note: str = "") -> Evidence:
    """``FINITE_ATTRACTOR`` evidence after checking ``A`` is an attractor."""
    A = as_stateset(A)
    if not A.is_explicit:
        raise EvidenceError("finite-attractor evidence needs an explicit finite set")
    if not is_attractor(chain, A, mu, depth=depth):
        raise EvidenceError(f"{A!r} is not an attractor")
    return Evidence(EvidenceKind.FINITE_ATTRACTOR,
                    note or f"finite attractor of {len(A)} states",
                    declared=not chain.is_finite, attractor=A)


def _hits(chain: MarkovChain, roots, target: StateSet, *, stop=None, depth=None) -> bool:
    """Whether a path from ``roots`` (not passing through ``stop``) meets ``target``."""
    if target.is_explicit and not target.members:
        return False
    stop = as_stateset(stop) if stop is not None else None
    seen = set()
    queue = deque()
    for r in roots:
        if r not in seen:
            seen.add(r)
            queue.append((r, 0))
    while queue:
        s, d = queue.popleft()
        if depth is not None and d >= depth:
            continue
        if s in target:
            return True
        if stop is not None and s in stop:
            continue
        for t in chain.successors(s):
            if t not in seen:
                seen.add(t)
                queue.append((t, d + 1))
    return False


def qualitative_reachability(chain: MarkovChain, mu, B, evidence: Evidence | None = None, *,
                             btilde=None, depth: int | None = None) -> Verdict:
    """Almost-sure / positive / zero probability of eventually reaching ``B``."""
    mu = as_distribution(mu)
    B = as_stateset(B)
    evidence = default_evidence(chain, evidence)
    bt = btilde if btilde is not None else avoid_set(chain, B, roots=mu.support(), depth=depth)
    bt = as_stateset(bt)
    if not _hits(chain, mu.support(), bt, stop=B, depth=depth):
        value = Qual.ALMOST_SURE
        note = "no path avoiding the target meets its avoid-set"
    elif all(s in bt for s in mu.support()):
        value = Qual.ZERO
        note = "initial support lies in the avoid-set"
    else:
        value = Qual.POSITIVE
        note = "some initial state can reach the target"
    return Verdict(value, "F B", evidence, (note,))


def qualitative_repeated(chain: MarkovChain, mu, B, evidence: Evidence | None = None, *,
                         btilde=None, btilde2=None, depth: int | None = None) -> Verdict:
    """Almost-sure / positive / zero probability of visiting ``B`` infinitely often."""
    mu = as_distribution(mu)
    B = as_stateset(B)
    evidence = default_evidence(chain, evidence)
    roots = mu.support()
    bt = btilde if btilde is not None else avoid_set(chain, B, roots=roots, depth=depth)
    bt = as_stateset(bt)
    if not _hits(chain, roots, bt, depth=depth):
        return Verdict(Qual.ALMOST_SURE, "GF B", evidence, ("avoid-set unreachable",))
    btt = btilde2 if btilde2 is not None else avoid_set(chain, bt, roots=roots, depth=depth)
    btt = as_stateset(btt)
    if _hits(chain, roots, btt, depth=depth):
        return Verdict(Qual.POSITIVE, "GF B", evidence, ("double avoid-set reachable",))
    return Verdict(Qual.ZERO, "GF B", evidence, ("double avoid-set unreachable",))


def almost_sure_omega(chain: MarkovChain, mu, dma: MullerAutomaton, *, attractor=None,
                      depth: int | None = None, evidence: Evidence | None = None) -> Verdict:
    """Whether the Muller condition holds almost surely.

    ``attractor`` is a finite attractor of the product (pair states).  For a
    finite chain it defaults to the part of the product reachable from the
    lifted initial distribution.
    """
    prod = product(chain, dma)
    mu2 = lift_initial(mu, dma)
    if attractor is None:
        if not chain.is_finite:
            raise CertificateRequired("an infinite chain needs an explicit finite attractor")
        attractor = StateSet.explicit(explore(prod, mu2.support()))
    evidence = default_evidence(chain, evidence)
    graph = attractor_graph(prod, attractor, mu=mu2, depth=depth)
    search_depth = graph.depth
    reachable = explore(prod, mu2.support(), depth=search_depth)
    good = set(graph.good(dma))
    bad_seen = [i for i, C in enumerate(graph.components)
                if i not in good and any(s in reachable for s in C)]
    notes = [f"{len(graph.components)} bottom components, {len(good)} good"]
    if bad_seen:
        notes.append(f"bad component reachable: {sorted_states(graph.components[bad_seen[0]])!r}")
    return Verdict(not bad_seen, "Inf in F", evidence, tuple(notes))


def product_attractor(A, dma: MullerAutomaton) -> StateSet:
    """``A x Q`` for an explicit attractor ``A`` of the factor chain."""
    A = as_stateset(A)
    return StateSet.explicit((s, q) for s in A.members for q in dma.locations)
