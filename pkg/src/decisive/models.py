"""Built-in model families used by the examples, tests and the CLI."""

from __future__ import annotations

import itertools
from fractions import Fraction

from .abstraction import AbstractionHandle, AlphaMap, fiber_bounds_evidence
from .core import FiniteChain, LazyChain, StateSet, parse_prob
from .errors import EvidenceError
from .estimators import EscapeBound
from .omega import MullerAutomaton


def _is_nat(s) -> bool:
    return isinstance(s, int) and not isinstance(s, bool) and s >= 0


def random_walk(p=Fraction(1, 3)) -> LazyChain:
    """Walk on the naturals: up with probability ``p``, down otherwise, 0 goes to 1."""
    p = parse_prob(p)
    exact = isinstance(p, Fraction)
    if not 0 < p < 1:
        raise ValueError("p must lie strictly between 0 and 1")

    def succ(n):
        if n == 0:
            return {1: 1}
        return {n + 1: p, n - 1: 1 - p}

    return LazyChain(succ, label_fn=lambda n: {"a"}, ap={"a"}, exact=exact, is_state=_is_nat,
                     encode=lambda n: n, name=f"random-walk(p={p})")


def truncated_walk(p=Fraction(1, 3), N: int = 50) -> FiniteChain:
    """The walk restricted to ``0..N``, reflecting at ``N``."""
    p = parse_prob(p)
    rows = {0: {1: 1}, N: {N - 1: 1}}
    for i in range(1, N):
        rows[i] = {i + 1: p, i - 1: 1 - p}
    return FiniteChain(rows, labels={i: {"a"} for i in rows}, ap={"a"},
                       name=f"walk(p={p}, N={N})")


def tf_chain(q=Fraction(1, 2)) -> FiniteChain:
    """Three-state chain s0 -> s1, s1 -> s0 | s2, s2 -> s1 | s2."""
    q = parse_prob(q)
    rows = {"s0": {"s1": 1}, "s1": {"s0": 1 - q, "s2": q}, "s2": {"s1": 1 - q, "s2": q}}
    return FiniteChain(rows, labels={s: {"a"} for s in rows}, ap={"a"}, name=f"Tf(q={q})")


def walk_to_tf(n) -> str:
    return "s0" if n == 0 else "s1" if n == 1 else "s2"


def walk_to_tf_alpha() -> AlphaMap:
    fibers = {"s0": lambda: iter([0]), "s1": lambda: iter([1]),
              "s2": lambda: itertools.count(2)}
    return AlphaMap(walk_to_tf, lambda a: fibers[a](), name="walk-to-Tf")


def walk_tf_handle(p=Fraction(1, 3), q=Fraction(1, 2)) -> AbstractionHandle:
    return AbstractionHandle(random_walk(p), tf_chain(q), walk_to_tf_alpha())


def walk_evidence(handle: AbstractionHandle, p, k: int = 4) -> object:
    """Uniform fiber bounds for the walk over the attractor ``{s0, s1}``.

    The preimage ``{0, 1}`` is an attractor of the walk exactly when the
    walk is recurrent, i.e. ``p <= 1/2``; that part is declared, the bounds
    are computed.
    """
    p = parse_prob(p)
    if p > Fraction(1, 2):
        raise EvidenceError("{0, 1} is not an attractor of the walk when p > 1/2")
    return fiber_bounds_evidence(
        handle, ["s0", "s1"], k=k,
        note="{0,1} is an attractor of the walk for p <= 1/2 (recurrence of the walk); "
             "bounds computed on the singleton fibers")


def walk_escape(p, K: int, target_max: int = 0, pairs: bool = False) -> EscapeBound:
    """From ``n >= K`` the walk ever reaches ``<= target_max`` with probability ``((1-p)/p)^(n-target_max)``."""
    p = parse_prob(p)
    if p <= Fraction(1, 2):
        raise ValueError("the escape bound is only below 1 for p > 1/2")
    bound = float(((1 - p) / p) ** (K - target_max))
    key = (lambda s: s[0]) if pairs else (lambda s: s)
    region = StateSet.predicate(lambda s: key(s) >= K, name=f"n>={K}")
    return EscapeBound(region, bound, f"gambler's ruin from level {K}")


def unfair_chain(levels: int | None = None) -> LazyChain:
    """``b -> a1``; from ``a_n`` to ``b`` with probability ``3^-n``, else to ``a_{n+1}``."""

    def succ(s):
        if s == "b":
            return {("a", 1): 1}
        n = s[1]
        back = Fraction(1, 3 ** n)
        return {"b": back, ("a", n + 1): 1 - back}

    def is_state(s):
        return s == "b" or (isinstance(s, tuple) and len(s) == 2 and s[0] == "a"
                            and _is_nat(s[1]) and s[1] >= 1)

    return LazyChain(succ, label_fn=lambda s: {"b"} if s == "b" else set(), ap={"b"},
                     is_state=is_state, name="unfair")


def unfair_return_probability(tol: float = 1e-15) -> float:
    """``1 - prod_{n>=1} (1 - 3^-n)``, the chance of ever coming back to ``b``."""
    prod = 1.0
    n = 1
    while True:
        term = 3.0 ** -n
        prod *= 1.0 - term
        if term < tol:
            break
        n += 1
    return 1.0 - prod


def always_a_dma(complete: bool = True) -> MullerAutomaton:
    """q0 -a-> q1 -a-> q2 -a-> q1, accepting ``{{q1, q2}}``."""
    a = frozenset({"a"})
    edges = [("q0", a, "q1"), ("q1", a, "q2"), ("q2", a, "q1")]
    return MullerAutomaton(["q0", "q1", "q2"], "q0", edges, [{"q1", "q2"}], ap={"a"},
                           complete=complete)


def two_sinks_chain() -> FiniteChain:
    """``c`` moves to absorbing ``a`` or ``b`` with probability 1/2 each."""
    half = Fraction(1, 2)
    return FiniteChain({"a": {"a": 1}, "b": {"b": 1}, "c": {"a": half, "b": half}},
                       labels={"a": {"a"}, "b": set(), "c": set()}, ap={"a"}, name="two-sinks")


BUILTIN_CHAINS = {
    "random-walk": random_walk,
    "truncated-walk": truncated_walk,
    "Tf": tf_chain,
    "unfair": unfair_chain,
    "two-sinks": two_sinks_chain,
}
