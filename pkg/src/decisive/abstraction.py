"""Abstractions of chains by quotient maps.

An ``AlphaMap`` sends concrete states to abstract ones.  An
``AbstractionHandle`` pairs a concrete system, an abstract chain and a map,
and records which properties of the pair have been checked: the one-step
abstraction condition, completeness and soundness.  Flags only change
through the checking functions in this module.
"""

from __future__ import annotations

import itertools
import logging
from collections.abc import Callable, Iterable, Mapping
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction

from .core import (
    MarkovChain,
    SparseDistribution,
    StateSet,
    all_states,
    as_distribution,
    as_stateset,
    explore,
    sorted_states,
)
from .errors import CertificateRequired, EvidenceError, Refusal
from .evidence import Evidence, EvidenceKind
from .formulas import bounded_event_probability, eventually
from .omega import MullerAutomaton, product
from .qualitative import Qual, avoid_set, is_attractor, qualitative_reachability
from .report import number

log = logging.getLogger(__name__)


class PreimageSet(StateSet):
    """``alpha^-1(image)``; keeps the image so samplers can test whole batches."""

    __slots__ = ("alpha", "image", "evidence")

    def __init__(self, alpha: AlphaMap, image: StateSet, name=None, evidence=None):
        super().__init__(test=lambda s: alpha(s) in image, name=name)
        self.alpha = alpha
        self.image = image
        self.evidence = evidence

    def __repr__(self):
        return f"PreimageSet({self.image!r})"


class AlphaMap:
    """A total map from concrete to abstract states with optional fiber enumeration.

    ``fibers`` is a mapping or a function from an abstract state to an
    iterable of concrete states; infinite fibers are cut at the bound given
    by the caller.
    """

    def __init__(self, fn: Callable, fibers: Mapping | Callable | None = None,
                 name: str | None = None):
        self.fn = fn
        self._fibers = fibers
        self.name = name

    def __call__(self, s):
        return self.fn(s)

    def preimage(self, A, name=None) -> PreimageSet:
        return PreimageSet(self, as_stateset(A), name=name)

    def has_fibers(self) -> bool:
        return self._fibers is not None

    def fiber(self, a, bound: int | None = None) -> list:
        """Up to ``bound`` states of ``alpha^-1(a)``, checked against the map."""
        if self._fibers is None:
            raise CertificateRequired(f"no fiber enumerator for {self.name or 'this map'}")
        src = self._fibers.get(a, ()) if isinstance(self._fibers, Mapping) else self._fibers(a)
        out = list(itertools.islice(src, bound)) if bound is not None else list(src)
        for s in out:
            if self.fn(s) != a:
                raise ValueError(f"fiber of {a!r} lists {s!r}, which maps to {self.fn(s)!r}")
        return out

    def lift_to_product(self, dma: MullerAutomaton) -> AlphaMap:
        base = self

        def fibers(pair):
            a, q = pair
            return ((s, q) for s in base.fiber(a))

        return AlphaMap(lambda pair: (base(pair[0]), pair[1]),
                        fibers if self.has_fibers() else None,
                        name=f"{self.name or 'alpha'} x id")

    def __repr__(self):
        return f"AlphaMap({self.name or 'anonymous'})"


def identity_alpha(states: Iterable | None = None) -> AlphaMap:
    fibers = (lambda a: [a]) if states is None else {s: [s] for s in states}
    return AlphaMap(lambda s: s, fibers, name="identity")


def table_alpha(table: Mapping, name: str | None = None) -> AlphaMap:
    """Map given as an explicit finite table."""
    fibers: dict = {}
    for s, a in table.items():
        fibers.setdefault(a, []).append(s)
    for a in fibers:
        fibers[a] = sorted_states(fibers[a])
    return AlphaMap(table.__getitem__, fibers, name=name)


def pushforward(alpha: AlphaMap | Callable, mu) -> SparseDistribution:
    """Image of ``mu`` under ``alpha``."""
    mu = as_distribution(mu)
    out: dict = {}
    for s, p in mu.items():
        a = alpha(s)
        out[a] = out.get(a, 0) + p
    return SparseDistribution(out, exact=mu.exact, check=False)


class Soundness(str, Enum):
    CERTIFIED = "Certified"
    UNSOUND = "WitnessedUnsound"
    UNKNOWN = "Unknown"


@dataclass
class AbstractionHandle:
    concrete: object
    abstract: MarkovChain
    alpha: AlphaMap
    is_abstraction: bool | None = None
    complete: bool | None = None
    soundness: Soundness = Soundness.UNKNOWN
    evidence: Evidence | None = None
    counterexample: object = None
    override: str | None = None
    check: object = field(default=None, repr=False)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {
            "is_abstraction": self.is_abstraction,
            "complete": self.complete,
            "soundness": self.soundness.value,
            "override": self.override,
            "notes": list(self.notes),
        }
        if self.evidence is not None:
            out["evidence"] = self.evidence.to_dict()
        if self.counterexample is not None:
            out["counterexample"] = self.counterexample.to_dict()
        if self.check is not None:
            out["check"] = self.check.to_dict()
        return out


@dataclass
class AbstractionCheck:
    """Outcome of the one-step check; truthy when no offending pair was found."""

    ok: bool
    offending: list
    checked: int
    bounded: bool
    note: str = ""

    def __bool__(self):
        return self.ok

    def to_dict(self) -> dict:
        return {"ok": self.ok, "checked": self.checked, "bounded": self.bounded,
                "note": self.note,
                "offending": [[repr(s), repr(a), reason] for s, a, reason in self.offending[:20]]}


def _concrete_points(handle: AbstractionHandle, bound: int | None, roots) -> tuple[list, bool]:
    """Concrete states to test, and whether the list is only a bounded sample."""
    conc = handle.concrete
    if getattr(conc, "is_finite", False):
        return list(all_states(conc)), False
    if roots is not None and isinstance(conc, MarkovChain):
        if bound is None:
            raise CertificateRequired("an exploration depth is needed for an infinite chain")
        return list(explore(conc, roots, depth=bound)), True
    if handle.alpha.has_fibers() and handle.abstract.is_finite:
        pts = []
        for a in all_states(handle.abstract):
            pts.extend(handle.alpha.fiber(a, bound))
        return pts, bound is not None or not getattr(conc, "is_finite", False)
    raise CertificateRequired("cannot enumerate concrete states: give roots and a bound, or fibers")


def _abstract_support(handle: AbstractionHandle, s) -> set:
    conc = handle.concrete
    if hasattr(conc, "abstract_successors"):
        return set(conc.abstract_successors(s, handle.alpha))
    return {handle.alpha(t) for t in conc.successors(s)}


def check_abstraction(handle: AbstractionHandle, bound: int | None = None, *,
                      roots: Iterable | None = None) -> AbstractionCheck:
    """One-step abstraction condition on the enumerated concrete states.

    For an abstract DMC the condition is: every concrete state moves with
    positive probability into exactly the fibers of the abstract successors
    of its image.  Labels must also agree when both sides are labelled.
    """
    points, bounded = _concrete_points(handle, bound, roots)
    abstract = handle.abstract
    offending = []
    for s in points:
        a = handle.alpha(s)
        if not abstract.has_state(a):
            offending.append((s, a, "image is not an abstract state"))
            continue
        want = set(abstract.successors(a))
        got = _abstract_support(handle, s)
        for b in sorted_states(want - got):
            offending.append((s, b, "abstract edge without concrete counterpart"))
        for b in sorted_states(got - want):
            offending.append((s, b, "concrete move without abstract edge"))
        conc = handle.concrete
        if isinstance(conc, MarkovChain) and (conc.ap or abstract.ap):
            if conc.label(s) != abstract.label(a):
                offending.append((s, a, "labels differ"))
    note = f"checked {len(points)} concrete states" + (" (bounded sample)" if bounded else "")
    result = AbstractionCheck(not offending, offending, len(points), bounded, note)
    handle.is_abstraction = result.ok
    handle.check = result
    if offending:
        s, b, why = offending[0]
        log.info("abstraction check failed at %r / %r: %s", s, b, why)
    return result


def certify_complete(handle: AbstractionHandle, attractor=None, *, mu=None,
                     depth: int | None = None) -> bool:
    """Completeness from finiteness of the abstract chain, or from a finite attractor."""
    if not handle.is_abstraction:
        handle.notes.append("completeness unknown: abstraction condition not certified")
        handle.complete = False
        return False
    if handle.abstract.is_finite:
        handle.complete = True
        handle.notes.append("complete: the abstract chain is finite")
        return True
    if attractor is not None:
        A = as_stateset(attractor)
        if A.is_explicit and is_attractor(handle.abstract, A, mu, depth=depth):
            handle.complete = True
            handle.notes.append("complete: the abstract chain has a finite attractor")
            return True
    handle.complete = False
    handle.notes.append("completeness unknown: no finite attractor for the abstract chain")
    return False


def alpha_closed_sets(abstract: MarkovChain) -> list[frozenset]:
    """All nonempty subsets of a finite abstract state space."""
    states = list(all_states(abstract))
    out = []
    for r in range(1, len(states) + 1):
        out.extend(frozenset(c) for c in itertools.combinations(states, r))
    return out


def fiber_bounds_evidence(handle: AbstractionHandle, A2, *, k: int, bound: int = 8,
                          note: str = "", concrete_attractor_mu=None,
                          depth: int = 64) -> Evidence:
    """Evidence for the uniform fiber bounds, computed on Dirac fiber points.

    For every state ``a`` of the finite abstract attractor ``A2`` and every
    alpha-closed target ``B``, the bound is the least probability over the
    enumerated fiber points of reaching ``B`` within ``k`` steps, or the
    zero case when no fiber point can reach ``B`` at all.  Fibers with more
    than ``bound`` points are sampled, which the evidence records as declared.
    """
    A2 = as_stateset(A2)
    abstract = handle.abstract
    if not abstract.is_finite:
        raise EvidenceError("fiber bounds need a finite abstract chain")
    if not is_attractor(abstract, A2):
        raise EvidenceError(f"{A2!r} is not an attractor of the abstract chain")
    conc = handle.concrete
    bounds = {}
    sampled = False
    for a in A2.states():
        pts = handle.alpha.fiber(a, bound + 1)
        if len(pts) > bound:
            pts, sampled = pts[:bound], True
        for B in alpha_closed_sets(abstract):
            target = handle.alpha.preimage(StateSet.explicit(B))
            vals = [bounded_event_probability(conc, SparseDistribution.dirac(x, conc.exact),
                                              eventually(target, "<=", k), k) for x in pts]
            p = min(vals)
            if p > 0:
                bounds[(a, B)] = (p, k)
                continue
            if any(v > 0 for v in vals):
                raise EvidenceError(f"fiber of {a!r} has no uniform bound for {sorted_states(B)!r}")
            reach = explore(conc, pts, depth=depth, stop=target)
            if any(s in target for s in reach):
                raise EvidenceError(
                    f"fiber of {a!r} reaches {sorted_states(B)!r} only after more than {k} steps")
            bounds[(a, B)] = (0, 0)
    if concrete_attractor_mu is not None:
        if not is_attractor(conc, handle.alpha.preimage(A2, name="alpha^-1(A2)"),
                            concrete_attractor_mu, depth=depth):
            raise EvidenceError("the preimage of the abstract attractor fails the bounded check")
    declared = sampled or not getattr(conc, "is_finite", False)
    return Evidence(EvidenceKind.FIBER_BOUNDS,
                    note or f"uniform fiber bounds over {len(A2)} attractor states, k={k}",
                    declared=declared, attractor=A2, bounds=bounds)


def _validate_fiber_bounds(handle: AbstractionHandle, ev: Evidence, spot: int = 4):
    if ev.attractor is None or not ev.bounds:
        raise EvidenceError("fiber-bounds evidence must carry the attractor and its bounds")
    A2 = as_stateset(ev.attractor)
    if not is_attractor(handle.abstract, A2):
        raise EvidenceError(f"{A2!r} is not an attractor of the abstract chain")
    conc = handle.concrete
    for a in A2.states():
        pts = handle.alpha.fiber(a, spot)
        for B in alpha_closed_sets(handle.abstract):
            if (a, B) not in ev.bounds:
                raise EvidenceError(f"missing bound for {a!r} and {sorted_states(B)!r}")
            p, k = ev.bounds[(a, B)]
            if p == 0:
                continue
            target = handle.alpha.preimage(StateSet.explicit(B))
            for x in pts:
                v = bounded_event_probability(conc, SparseDistribution.dirac(x, conc.exact),
                                              eventually(target, "<=", k), k)
                if v < p:
                    raise EvidenceError(f"bound {p} for {a!r} fails at {x!r} (value {v})")


_ACCEPTED = {EvidenceKind.FINITE_CHAIN, EvidenceKind.FIBER_BOUNDS, EvidenceKind.FAIRNESS,
             EvidenceKind.STA_CLASS, EvidenceKind.FINITE_ATTRACTOR}


def certify_sound_via_decisiveness(handle: AbstractionHandle, evidence: Evidence) -> bool:
    """Mark the abstraction sound, given decisiveness evidence for the concrete system."""
    if not handle.is_abstraction:
        raise Refusal("soundness needs a certified abstraction; run check_abstraction first")
    if evidence.tainted:
        raise EvidenceError("assumed evidence cannot certify soundness; use override_soundness")
    if evidence.kind not in _ACCEPTED:
        raise EvidenceError(f"evidence of kind {evidence.kind.value} does not support soundness")
    if evidence.kind is EvidenceKind.FINITE_CHAIN and not getattr(handle.concrete, "is_finite", False):
        raise EvidenceError("finite-chain evidence given for an infinite concrete system")
    if evidence.kind is EvidenceKind.FIBER_BOUNDS:
        _validate_fiber_bounds(handle, evidence)
    handle.soundness = Soundness.CERTIFIED
    handle.evidence = evidence.supporting(
        EvidenceKind.SOUND_ABSTRACTION,
        "concrete system decisive w.r.t. alpha-closed sets, hence the abstraction is sound")
    return True


def override_soundness(handle: AbstractionHandle, note: str) -> AbstractionHandle:
    """Treat the abstraction as sound without proof; results downstream are tainted."""
    log.warning("soundness overridden: %s", note)
    handle.override = note
    handle.evidence = Evidence.assumed(note)
    return handle


@dataclass
class Counterexample:
    target: frozenset
    initial: object
    abstract_value: object
    upper: float
    samples: int | None
    confidence: float | None

    def to_dict(self) -> dict:
        return {"target": [repr(s) for s in sorted_states(self.target)],
                "initial": repr(self.initial), "abstract_value": str(self.abstract_value),
                "concrete_upper": number(self.upper), "samples": self.samples,
                "confidence": self.confidence}


def default_catalogue(abstract: MarkovChain) -> list[frozenset]:
    """Singletons, then the nonempty avoid-sets of singletons."""
    states = list(all_states(abstract))
    cat = [frozenset([s]) for s in states]
    for s in states:
        bt = frozenset(avoid_set(abstract, [s]).members)
        if bt and bt not in cat:
            cat.append(bt)
    return cat


SAMPLE_SCHEDULE = (1_000, 10_000, 100_000, 1_000_000)


def soundness_witness_search(handle: AbstractionHandle, mu, *, estimator=None, catalogue=None,
                             confidence: float = 0.99, max_samples: int = 1_000_000,
                             escape=None, horizon: int = 10_000,
                             schedule: Iterable[int] = SAMPLE_SCHEDULE) -> Counterexample | None:
    """Look for a target reached surely in the abstraction but not in the concrete system.

    Candidates are targets ``B`` with abstract value 1 from the pushed-forward
    distribution.  The concrete upper bound comes from ``estimator``; with a
    sampling estimator the confidence is split evenly over all tests run, so
    the reported counterexample holds at the stated overall confidence.
    """
    from .estimators import hoeffding
    from .quantitative import run_scheme

    abstract = handle.abstract
    if not abstract.is_finite:
        raise Refusal("witness search needs a finite abstract chain")
    mu = as_distribution(mu)
    mu_a = pushforward(handle.alpha, mu)
    catalogue = [frozenset(B) for B in (catalogue if catalogue is not None
                                         else default_catalogue(abstract))]
    candidates = [B for B in catalogue
                  if qualitative_reachability(abstract, mu_a, B).value is Qual.ALMOST_SURE]
    if not candidates:
        return None
    sampled = estimator is not None and getattr(estimator, "sampling", None) is not None
    if estimator is None:
        from .estimators import ExactEstimator
        if not getattr(handle.concrete, "is_finite", False):
            raise Refusal("an estimator is required for an infinite concrete system")
        estimator = ExactEstimator(handle.concrete)
    sizes = [n for n in schedule if n <= max_samples] if sampled else [None]
    delta = (1.0 - confidence) / (len(candidates) * len(sizes)) if sampled else 0.0
    for B in candidates:
        target = handle.alpha.preimage(StateSet.explicit(B))
        no = handle.alpha.preimage(avoid_set(abstract, B))
        for n in sizes:
            est = replace(estimator, samples=n, confidence=1.0 - delta) if sampled else estimator
            res = run_scheme(est, mu, target, no, eps=1e-9 if not sampled else 2 * est.slack + 1e-9,
                             budget=horizon, escape=escape, prop="F alpha^-1(B)")
            upper = float(res.hi)
            if upper < 1.0:
                ce = Counterexample(B, mu, Fraction(1), upper, n,
                                    confidence if sampled else None)
                handle.soundness = Soundness.UNSOUND
                handle.counterexample = ce
                return ce
            # hopeless even at the largest sample size
            if sampled and upper - est.slack + hoeffding(max(sizes), delta) >= 1.0:
                break
    return None


def transfer_attractor(handle: AbstractionHandle, A2) -> PreimageSet:
    """``alpha^-1(A2)`` as an attractor of the concrete system, under certified soundness."""
    if handle.soundness is not Soundness.CERTIFIED:
        raise Refusal("attractors transfer only through a certified sound abstraction")
    A2 = as_stateset(A2)
    if handle.abstract.is_finite and not is_attractor(handle.abstract, A2):
        raise Refusal(f"{A2!r} is not an attractor of the abstract chain")
    ev = handle.evidence.supporting(EvidenceKind.FINITE_ATTRACTOR,
                                    "preimage of an abstract attractor under a sound abstraction")
    return PreimageSet(handle.alpha, A2, name="alpha^-1(A2)", evidence=ev)


def lift_alpha_to_product(alpha: AlphaMap, dma: MullerAutomaton) -> AlphaMap:
    """``(s, q) -> (alpha(s), q)``."""
    return alpha.lift_to_product(dma)


def lift_handle(handle: AbstractionHandle, dma: MullerAutomaton) -> AbstractionHandle:
    """Handle between the two products; nothing is carried over unchecked."""
    conc = handle.concrete
    conc2 = conc.for_product(dma) if hasattr(conc, "for_product") else product(conc, dma)
    return AbstractionHandle(conc2, product(handle.abstract, dma),
                             lift_alpha_to_product(handle.alpha, dma))


__all__ = [
    "AbstractionCheck", "AbstractionHandle", "AlphaMap", "Counterexample", "PreimageSet",
    "Soundness", "alpha_closed_sets", "certify_complete", "certify_sound_via_decisiveness",
    "check_abstraction", "default_catalogue", "fiber_bounds_evidence", "identity_alpha",
    "lift_alpha_to_product", "lift_handle", "override_soundness", "pushforward",
    "soundness_witness_search", "table_alpha", "transfer_attractor",
]
