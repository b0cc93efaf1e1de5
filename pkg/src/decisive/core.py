"""Labelled Markov chains, sparse distributions and state sets.

Two numeric modes coexist.  Probabilities stored as ``Fraction`` make a
chain *exact*: every downstream computation on it stays rational.  Float
probabilities make it *approximate*, with distributions normalised to
within ``APPROX_TOL`` and tiny entries pruned during propagation.
"""

from __future__ import annotations

import logging
from collections import deque
from collections.abc import Callable, Hashable, Iterable, Mapping
from fractions import Fraction
from typing import Any

from .errors import InvalidModel, ResourceExhausted, UnknownState, ZeroMass

log = logging.getLogger(__name__)

APPROX_TOL = 1e-12
PRUNE_BELOW = 1e-15
DEFAULT_MAX_STATES = 10**6

State = Hashable


def parse_prob(value) -> Fraction | float:
    """Read a probability written as ``"2/3"``, ``"0.25"``, an int or a float.

    Decimal literals are taken at face value, so ``0.1`` becomes ``1/10``.
    """
    if isinstance(value, bool):
        raise TypeError("booleans are not probabilities")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except ValueError:
            raise InvalidModel(f"cannot parse probability {value!r}") from None
    raise TypeError(f"cannot interpret {value!r} as a probability")


def order_key(s) -> tuple:
    """Total order over the state identifiers used in this package."""
    if isinstance(s, bool):
        return (0, int(s))
    if isinstance(s, (int, float, Fraction)):
        return (1, s)
    if isinstance(s, str):
        return (2, s)
    if isinstance(s, tuple):
        return (3, tuple(order_key(x) for x in s))
    if isinstance(s, frozenset):
        return (4, tuple(sorted(order_key(x) for x in s)))
    sort_key = getattr(s, "sort_key", None)
    if sort_key is not None:
        return (5, type(s).__name__, sort_key())
    return (6, type(s).__name__, repr(s))


def sorted_states(states: Iterable) -> list:
    return sorted(states, key=order_key)


def _is_exact_number(w) -> bool:
    return isinstance(w, (Fraction, int)) and not isinstance(w, bool)


class SparseDistribution(Mapping):
    """Finitely supported probability distribution.

    Entries with zero weight are dropped; iteration follows ``order_key`` so
    that everything built on top of it is deterministic.
    """

    __slots__ = ("_p", "exact")

    def __init__(self, entries: Mapping | Iterable = (), *, exact: bool | None = None,
                 check: bool = True):
        acc: dict = {}
        items = entries.items() if isinstance(entries, Mapping) else entries
        for s, w in items:
            if isinstance(w, str):
                w = parse_prob(w)
            if w < 0:
                raise ValueError(f"negative probability {w} for {s!r}")
            if w == 0:
                continue
            acc[s] = acc.get(s, 0) + w
        if exact is None:
            exact = all(_is_exact_number(w) for w in acc.values())
        if exact:
            acc = {s: Fraction(w) for s, w in acc.items()}
        else:
            acc = {s: float(w) for s, w in acc.items()}
        if check:
            total = sum(acc.values())
            if exact and total != 1:
                raise ValueError(f"distribution has mass {total}, expected 1")
            if not exact and abs(total - 1.0) > APPROX_TOL:
                raise ValueError(f"distribution has mass {total!r}, expected 1")
        self._p = dict(sorted(acc.items(), key=lambda kv: order_key(kv[0])))
        self.exact = exact

    @classmethod
    def dirac(cls, s, exact: bool = True) -> SparseDistribution:
        return cls({s: Fraction(1) if exact else 1.0})

    @classmethod
    def uniform(cls, states: Iterable, exact: bool = True) -> SparseDistribution:
        states = list(dict.fromkeys(states))
        if not states:
            raise ValueError("uniform distribution over an empty set")
        w = Fraction(1, len(states)) if exact else 1.0 / len(states)
        return cls({s: w for s in states}, exact=exact, check=exact)

    def __getitem__(self, s):
        return self._p[s]

    def __iter__(self):
        return iter(self._p)

    def __len__(self):
        return len(self._p)

    def __repr__(self):
        body = ", ".join(f"{s!r}: {w}" for s, w in self._p.items())
        return f"SparseDistribution({{{body}}})"

    def prob(self, s):
        return self._p.get(s, Fraction(0) if self.exact else 0.0)

    def support(self) -> tuple:
        return tuple(self._p)

    def mass(self, A) -> Fraction | float:
        A = as_stateset(A)
        zero = Fraction(0) if self.exact else 0.0
        return sum((w for s, w in self._p.items() if s in A), zero)

    def to_float(self) -> SparseDistribution:
        return SparseDistribution({s: float(w) for s, w in self._p.items()}, exact=False)


def as_distribution(mu) -> SparseDistribution:
    if isinstance(mu, SparseDistribution):
        return mu
    if isinstance(mu, Mapping):
        return SparseDistribution(mu)
    return SparseDistribution.dirac(mu)


class StateSet:
    """A set of states, either listed explicitly or given by a membership test.

    ``depth`` is an optional closure certificate: a promise that exploring the
    chain to that depth from the initial support decides every query the
    caller will make.  Membership tests may raise ``UnresolvableSet`` when
    asked about states outside what they can decide.
    """

    __slots__ = ("_members", "_test", "depth", "name", "_hash")

    def __init__(self, members=None, test=None, depth=None, name=None):
        if (members is None) == (test is None):
            raise ValueError("give exactly one of members or test")
        self._members = frozenset(members) if members is not None else None
        self._test = test
        self.depth = depth
        self.name = name
        self._hash = None

    @classmethod
    def explicit(cls, states: Iterable, name=None) -> StateSet:
        return cls(members=states, name=name)

    @classmethod
    def predicate(cls, test: Callable[[Any], bool], depth=None, name=None) -> StateSet:
        return cls(test=test, depth=depth, name=name)

    @classmethod
    def everything(cls) -> StateSet:
        return cls(test=lambda s: True, name="all")

    @classmethod
    def nothing(cls) -> StateSet:
        return cls(members=(), name="none")

    @property
    def is_explicit(self) -> bool:
        return self._members is not None

    @property
    def members(self) -> frozenset:
        if self._members is None:
            raise TypeError(f"{self!r} is not an explicit set")
        return self._members

    def states(self) -> list:
        return sorted_states(self.members)

    def __contains__(self, s) -> bool:
        if self._members is not None:
            return s in self._members
        return bool(self._test(s))

    def __iter__(self):
        return iter(self.states())

    def __len__(self):
        return len(self.members)

    def __bool__(self):
        return True

    def __eq__(self, other):
        if not isinstance(other, StateSet):
            return NotImplemented
        if self._members is not None and other._members is not None:
            return self._members == other._members
        return self is other

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self._members) if self._members is not None else id(self)
        return self._hash

    def __repr__(self):
        if self._members is not None:
            shown = ", ".join(repr(s) for s in self.states()[:8])
            more = ", ..." if len(self._members) > 8 else ""
            return f"StateSet({{{shown}{more}}})"
        return f"StateSet(<{self.name or 'predicate'}>)"

    def _min_depth(self, other):
        depths = [d for d in (self.depth, other.depth) if d is not None]
        return min(depths) if depths else None

    def union(self, other) -> StateSet:
        other = as_stateset(other)
        if self.is_explicit and other.is_explicit:
            return StateSet.explicit(self._members | other._members)
        return StateSet.predicate(lambda s: s in self or s in other,
                                  depth=self._min_depth(other))

    def intersection(self, other) -> StateSet:
        other = as_stateset(other)
        if self.is_explicit and other.is_explicit:
            return StateSet.explicit(self._members & other._members)
        if self.is_explicit:
            return StateSet.explicit(s for s in self._members if s in other)
        if other.is_explicit:
            return StateSet.explicit(s for s in other._members if s in self)
        return StateSet.predicate(lambda s: s in self and s in other,
                                  depth=self._min_depth(other))

    def difference(self, other) -> StateSet:
        other = as_stateset(other)
        if self.is_explicit:
            return StateSet.explicit(s for s in self._members if s not in other)
        return StateSet.predicate(lambda s: s in self and s not in other,
                                  depth=self._min_depth(other))

    def complement(self) -> StateSet:
        return StateSet.predicate(lambda s: s not in self, depth=self.depth)

    __or__ = union
    __and__ = intersection
    __sub__ = difference


def as_stateset(x) -> StateSet:
    if isinstance(x, StateSet):
        return x
    if callable(x):
        return StateSet.predicate(x)
    return StateSet.explicit(x)


class MarkovChain:
    """Interface shared by finite and lazily generated chains."""

    ap: frozenset = frozenset()
    exact: bool = True
    is_finite: bool = False
    name: str | None = None

    def successors(self, s) -> SparseDistribution:
        raise NotImplementedError

    def label(self, s) -> frozenset:
        return frozenset()

    def has_state(self, s) -> bool:
        try:
            self.successors(s)
        except UnknownState:
            return False
        return True


class FiniteChain(MarkovChain):
    """Explicit finite chain given by kernel rows ``{s: {t: prob}}``."""

    is_finite = True

    def __init__(self, rows: Mapping, labels: Mapping | None = None, ap: Iterable | None = None,
                 name: str | None = None, exact: bool | None = None):
        declared = set(rows)
        parsed = {}
        for s, row in rows.items():
            try:
                dist = row if isinstance(row, SparseDistribution) else SparseDistribution(
                    {t: parse_prob(w) if isinstance(w, str) else w for t, w in row.items()},
                    exact=exact)
            except ValueError as exc:
                raise InvalidModel(f"row of state {s!r}: {exc}") from None
            for t in dist:
                if t not in declared:
                    raise InvalidModel(f"successor {t!r} of {s!r} is not a declared state")
            parsed[s] = dist
        self.states = tuple(sorted_states(parsed))
        self._rows = parsed
        self._index = {s: i for i, s in enumerate(self.states)}
        self.exact = all(d.exact for d in parsed.values()) if exact is None else exact
        labels = labels or {}
        for s in labels:
            if s not in declared:
                raise InvalidModel(f"label given for undeclared state {s!r}")
        self._labels = {s: frozenset(labels.get(s, ())) for s in self.states}
        used = frozenset().union(*self._labels.values()) if self._labels else frozenset()
        self.ap = frozenset(ap) if ap is not None else used
        if not used <= self.ap:
            raise InvalidModel(f"labels {sorted(used - self.ap)} are not atomic propositions")
        self.name = name
        self._pred = None

    def successors(self, s) -> SparseDistribution:
        try:
            return self._rows[s]
        except (KeyError, TypeError):
            raise UnknownState(s) from None

    def label(self, s) -> frozenset:
        try:
            return self._labels[s]
        except (KeyError, TypeError):
            raise UnknownState(s) from None

    def has_state(self, s) -> bool:
        try:
            return s in self._rows
        except TypeError:
            return False

    def encode(self, s) -> int:
        return self._index[s]

    def predecessors(self) -> dict:
        if self._pred is None:
            pred = {s: set() for s in self.states}
            for s in self.states:
                for t in self._rows[s]:
                    pred[t].add(s)
            self._pred = pred
        return self._pred

    def __repr__(self):
        return f"FiniteChain({self.name or len(self.states)} states)"


class LazyChain(MarkovChain):
    """Countable chain whose rows are produced on demand and memoised.

    ``successor_fn`` returns a mapping ``{t: prob}``.  More than
    ``max_states`` distinct expanded states raises ``ResourceExhausted``.
    """

    def __init__(self, successor_fn: Callable, *, label_fn: Callable | None = None,
                 ap: Iterable = (), exact: bool = True, is_state: Callable | None = None,
                 encode: Callable | None = None, max_states: int = DEFAULT_MAX_STATES,
                 name: str | None = None):
        self._fn = successor_fn
        self._label_fn = label_fn
        self.ap = frozenset(ap)
        self.exact = exact
        self._is_state = is_state
        self._encode = encode
        self.max_states = max_states
        self.name = name
        self._cache: dict = {}

    def successors(self, s) -> SparseDistribution:
        try:
            return self._cache[s]
        except KeyError:
            pass
        except TypeError:
            raise UnknownState(s) from None
        if self._is_state is not None and not self._is_state(s):
            raise UnknownState(s)
        if len(self._cache) >= self.max_states:
            raise ResourceExhausted(
                f"lazy chain {self.name or ''} explored more than {self.max_states} states")
        row = self._fn(s)
        dist = row if isinstance(row, SparseDistribution) else SparseDistribution(
            row, exact=self.exact)
        self._cache[s] = dist
        return dist

    def label(self, s) -> frozenset:
        if self._is_state is not None and not self._is_state(s):
            raise UnknownState(s)
        return frozenset(self._label_fn(s)) if self._label_fn else frozenset()

    def has_state(self, s) -> bool:
        if self._is_state is not None:
            return bool(self._is_state(s))
        return super().has_state(s)

    def encode(self, s) -> int:
        if self._encode is None:
            raise TypeError("this chain has no integer encoding")
        return self._encode(s)

    def __repr__(self):
        return f"LazyChain({self.name or 'anonymous'})"


def successors(chain: MarkovChain, s) -> SparseDistribution:
    return chain.successors(s)


def explore(chain: MarkovChain, roots: Iterable, *, depth: int | None = None,
            stop=None, max_states: int | None = None) -> dict:
    """Breadth-first exploration from ``roots``.

    Returns ``{state: distance}``.  States in ``stop`` are recorded but not
    expanded; states at distance ``depth`` are not expanded either.
    """
    stop = as_stateset(stop) if stop is not None else None
    cap = max_states if max_states is not None else DEFAULT_MAX_STATES
    dist: dict = {}
    queue = deque()
    for r in roots:
        if r not in dist:
            dist[r] = 0
            queue.append(r)
    while queue:
        s = queue.popleft()
        d = dist[s]
        if depth is not None and d >= depth:
            continue
        if stop is not None and s in stop:
            continue
        for t in chain.successors(s):
            if t not in dist:
                if len(dist) >= cap:
                    raise ResourceExhausted(f"exploration exceeded {cap} states")
                dist[t] = d + 1
                queue.append(t)
    return dist


def reachable_chain(chain: MarkovChain, roots: Iterable, max_states: int | None = None) -> FiniteChain:
    """The finite sub-chain reachable from ``roots``, materialised explicitly."""
    seen = explore(chain, roots, max_states=max_states)
    rows = {s: chain.successors(s) for s in seen}
    labels = {s: chain.label(s) for s in seen}
    return FiniteChain(rows, labels=labels, ap=chain.ap, name=chain.name, exact=chain.exact)


def all_states(chain: MarkovChain) -> tuple:
    if not chain.is_finite:
        raise TypeError(f"{chain!r} is not finite")
    return tuple(chain.states)


def predecessor_map(chain: MarkovChain, states: Iterable | None = None) -> dict:
    if isinstance(chain, FiniteChain) and states is None:
        return chain.predecessors()
    states = list(states) if states is not None else list(all_states(chain))
    pred = {s: set() for s in states}
    for s in states:
        for t in chain.successors(s):
            pred.setdefault(t, set()).add(s)
    return pred


def can_reach(chain: MarkovChain, targets, states: Iterable | None = None) -> set:
    """States of a finite chain from which some state of ``targets`` is reachable."""
    states = list(states) if states is not None else list(all_states(chain))
    targets = as_stateset(targets)
    pred = predecessor_map(chain, states)
    good = {s for s in states if s in targets}
    queue = deque(good)
    while queue:
        t = queue.popleft()
        for s in pred.get(t, ()):
            if s not in good:
                good.add(s)
                queue.append(s)
    return good


def _zero(exact: bool):
    return Fraction(0) if exact else 0.0


def step_transform(chain: MarkovChain, mu) -> SparseDistribution:
    """One application of the measure transformer: ``mu`` pushed through the kernel."""
    mu = as_distribution(mu)
    exact = mu.exact and chain.exact
    out: dict = {}
    for s, p in mu.items():
        for t, q in chain.successors(s).items():
            out[t] = out.get(t, 0) + p * q
    if exact:
        return SparseDistribution(out, exact=True)
    out = {t: float(w) for t, w in out.items()}
    small = [t for t, w in out.items() if w < PRUNE_BELOW]
    if small:
        dropped = sum(out.pop(t) for t in small)
        log.info("pruned %d entries (mass %.3g) below %g", len(small), dropped, PRUNE_BELOW)
    total = sum(out.values())
    return SparseDistribution({t: w / total for t, w in out.items()}, exact=False)


def cylinder_probability(chain: MarkovChain, mu, sets) -> Fraction | float:
    """Probability that the first ``len(sets)`` states of a run lie in ``sets``."""
    mu = as_distribution(mu)
    sets = [as_stateset(A) for A in sets]
    if not sets:
        raise ValueError("a cylinder needs at least one set")
    exact = mu.exact and chain.exact
    v = {s: p for s, p in mu.items() if s in sets[0]}
    for A in sets[1:]:
        nxt: dict = {}
        for s, p in v.items():
            for t, q in chain.successors(s).items():
                if t in A:
                    nxt[t] = nxt.get(t, 0) + p * q
        v = nxt
    return sum(v.values(), _zero(exact))


def conditional(mu, A) -> SparseDistribution:
    """``mu`` conditioned on ``A``."""
    mu = as_distribution(mu)
    A = as_stateset(A)
    m = mu.mass(A)
    if m == 0:
        raise ZeroMass(f"the distribution gives no mass to {A!r}")
    return SparseDistribution({s: p / m for s, p in mu.items() if s in A}, exact=mu.exact,
                              check=mu.exact)


def _solve_exact(unknowns: list, rows: dict, rhs: dict) -> dict:
    """Gaussian elimination over the rationals for ``(I - P) x = b``.

    The matrix is a nonsingular M-matrix once states that cannot reach the
    target are removed, so elimination without pivoting is safe.
    """
    pos = {s: i for i, s in enumerate(unknowns)}
    n = len(unknowns)
    A = [dict() for _ in range(n)]
    b = [Fraction(0)] * n
    cols = [set() for _ in range(n)]
    for s in unknowns:
        i = pos[s]
        A[i][i] = Fraction(1)
        for t, w in rows[s].items():
            j = pos.get(t)
            if j is not None:
                A[i][j] = A[i].get(j, 0) - w
        A[i] = {j: w for j, w in A[i].items() if w != 0}
        for j in A[i]:
            cols[j].add(i)
        b[i] = rhs[s]
    for k in range(n):
        piv = A[k][k]
        row_k = A[k]
        for i in sorted(r for r in cols[k] if r > k):
            f = A[i][k] / piv
            row_i = A[i]
            for j, w in row_k.items():
                v = row_i.get(j, 0) - f * w
                if v == 0:
                    if j in row_i:
                        del row_i[j]
                        cols[j].discard(i)
                else:
                    if j not in row_i:
                        cols[j].add(i)
                    row_i[j] = v
            b[i] -= f * b[k]
    x = [Fraction(0)] * n
    for k in range(n - 1, -1, -1):
        acc = b[k]
        for j, w in A[k].items():
            if j > k:
                acc -= w * x[j]
        x[k] = acc / A[k][k]
    return {s: x[pos[s]] for s in unknowns}


def _solve_float(unknowns: list, rows: dict, rhs: dict) -> dict:
    import numpy as np
    from scipy.sparse import identity, csr_matrix
    from scipy.sparse.linalg import spsolve

    pos = {s: i for i, s in enumerate(unknowns)}
    n = len(unknowns)
    r, c, v = [], [], []
    for s in unknowns:
        for t, w in rows[s].items():
            j = pos.get(t)
            if j is not None:
                r.append(pos[s])
                c.append(j)
                v.append(float(w))
    P = csr_matrix((v, (r, c)), shape=(n, n))
    b = np.array([float(rhs[s]) for s in unknowns])
    x = spsolve((identity(n, format="csr") - P).tocsc(), b)
    x = np.atleast_1d(x)
    return {s: float(x[pos[s]]) for s in unknowns}


def exact_reachability_finite(chain: MarkovChain, B, *, exact: bool | None = None,
                              states: Iterable | None = None) -> dict:
    """``P_s(F B)`` for every state ``s`` of a finite chain, via a linear solve.

    The system is restricted to states that can reach ``B``; the rest get 0.
    ``states`` restricts the computation to a successor-closed subset.
    """
    states = list(states) if states is not None else list(all_states(chain))
    B = as_stateset(B)
    exact = chain.exact if exact is None else exact
    one, zero = (Fraction(1), Fraction(0)) if exact else (1.0, 0.0)
    reach = can_reach(chain, B, states)
    in_b = {s for s in states if s in B}
    unknowns = [s for s in sorted_states(reach) if s not in in_b]
    rows, rhs = {}, {}
    for s in unknowns:
        row = chain.successors(s)
        rows[s] = {t: (w if exact else float(w)) for t, w in row.items() if t in reach and t not in in_b}
        rhs[s] = sum(((w if exact else float(w)) for t, w in row.items() if t in in_b), zero)
    solved = (_solve_exact if exact else _solve_float)(unknowns, rows, rhs) if unknowns else {}
    out = {}
    for s in sorted_states(states):
        if s in in_b:
            out[s] = one
        elif s in solved:
            out[s] = solved[s]
        else:
            out[s] = zero
    return out
