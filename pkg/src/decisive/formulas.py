"""Path formulas over state sets and their bounded-horizon probabilities.

Bounded formulas are evaluated by formula progression: after reading the
current state, a formula rewrites to an obligation on the remainder of the
path.  Propagating mass over (state, obligation) pairs and absorbing it once
the obligation becomes a constant gives the exact probability.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .core import MarkovChain, StateSet, as_distribution, as_stateset
from .errors import UnboundedFormula


class PathFormula:
    def __and__(self, other):
        return And(self, other)

    def __or__(self, other):
        return Or(self, other)

    def __invert__(self):
        return Not(self)


@dataclass(frozen=True)
class Const(PathFormula):
    value: bool


TRUE = Const(True)
FALSE = Const(False)


@dataclass(frozen=True)
class Atom(PathFormula):
    states: StateSet


@dataclass(frozen=True)
class Not(PathFormula):
    arg: PathFormula


@dataclass(frozen=True)
class And(PathFormula):
    left: PathFormula
    right: PathFormula


@dataclass(frozen=True)
class Or(PathFormula):
    left: PathFormula
    right: PathFormula


@dataclass(frozen=True)
class Until(PathFormula):
    """``left U(op k) right`` with ``op`` one of ``"<="``, ``"="``, ``">="``."""

    left: PathFormula
    right: PathFormula
    op: str = ">="
    bound: int = 0

    def __post_init__(self):
        if self.op not in ("<=", "=", ">="):
            raise ValueError(f"unknown bound operator {self.op!r}")
        if not isinstance(self.bound, int) or self.bound < 0:
            raise ValueError("until bounds are nonnegative integers")


def atom(B) -> Atom:
    return Atom(as_stateset(B))


def _wrap(phi) -> PathFormula:
    return phi if isinstance(phi, PathFormula) else atom(phi)


def eventually(phi, op: str = ">=", bound: int = 0) -> Until:
    return Until(TRUE, _wrap(phi), op, bound)


def globally(phi, op: str = ">=", bound: int = 0) -> Not:
    return Not(eventually(Not(_wrap(phi)), op, bound))


def until(left, right, op: str = ">=", bound: int = 0) -> Until:
    return Until(_wrap(left), _wrap(right), op, bound)


def horizon_of(phi: PathFormula) -> int:
    """Length of the path prefix that decides ``phi``; raises if unbounded."""
    if isinstance(phi, (Const, Atom)):
        return 0
    if isinstance(phi, Not):
        return horizon_of(phi.arg)
    if isinstance(phi, (And, Or)):
        return max(horizon_of(phi.left), horizon_of(phi.right))
    if isinstance(phi, Until):
        if phi.op == ">=":
            raise UnboundedFormula(f"until with bound >= {phi.bound} is unbounded")
        return phi.bound + max(horizon_of(phi.left), horizon_of(phi.right))
    raise TypeError(f"not a path formula: {phi!r}")


def _neg(a):
    if isinstance(a, Const):
        return FALSE if a.value else TRUE
    if isinstance(a, Not):
        return a.arg
    return Not(a)


def _conj(a, b):
    if a == FALSE or b == FALSE:
        return FALSE
    if a == TRUE:
        return b
    if b == TRUE or a == b:
        return a
    return And(a, b)


def _disj(a, b):
    if a == TRUE or b == TRUE:
        return TRUE
    if a == FALSE:
        return b
    if b == FALSE or a == b:
        return a
    return Or(a, b)


def progress(phi: PathFormula, s) -> PathFormula:
    """Obligation on the suffix after the current state ``s``."""
    if isinstance(phi, Const):
        return phi
    if isinstance(phi, Atom):
        return TRUE if s in phi.states else FALSE
    if isinstance(phi, Not):
        return _neg(progress(phi.arg, s))
    if isinstance(phi, And):
        return _conj(progress(phi.left, s), progress(phi.right, s))
    if isinstance(phi, Or):
        return _disj(progress(phi.left, s), progress(phi.right, s))
    if isinstance(phi, Until):
        if phi.op == ">=":
            raise UnboundedFormula("cannot progress an unbounded until")
        now_right = progress(phi.right, s)
        if phi.bound == 0:
            return now_right
        rest = Until(phi.left, phi.right, phi.op, phi.bound - 1)
        keep = _conj(progress(phi.left, s), rest)
        if phi.op == "<=":
            return _disj(now_right, keep)
        return keep
    raise TypeError(f"not a path formula: {phi!r}")


def bounded_event_probability(chain: MarkovChain, mu, phi: PathFormula, horizon: int):
    """Exact probability of a bounded path formula."""
    depth = horizon_of(phi)
    if depth > horizon:
        raise ValueError(f"formula needs a horizon of {depth}, more than {horizon}")
    mu = as_distribution(mu)
    exact = mu.exact and chain.exact
    total = Fraction(0) if exact else 0.0
    frontier = {(s, phi): p for s, p in mu.items()}
    while frontier:
        nxt: dict = {}
        for (s, psi), p in frontier.items():
            r = progress(psi, s)
            if r == TRUE:
                total += p
                continue
            if r == FALSE:
                continue
            for t, q in chain.successors(s).items():
                key = (t, r)
                nxt[key] = nxt.get(key, 0) + p * q
        frontier = nxt
    return total
