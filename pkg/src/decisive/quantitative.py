"""Interval approximation schemes.

Every scheme is one loop over the horizon ``n``: the estimator reports how
much mass has been absorbed in the yes-set and in the no-set, and the
interval ``[yes, 1 - no]`` shrinks monotonically.  Decisiveness of the
input is what makes the gap vanish; when it does not, the loop reports
``Stalled`` or ``BudgetExhausted`` together with the residual gap.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

from .core import MarkovChain, StateSet, as_distribution, as_stateset, explore
from .errors import Refusal, SinkViolation
from .estimators import (EscapeBound, ExactEstimator, Masses, ScaledMasses, TimeInterval, TimeWindow,
                         UnreducedFraction)
from .evidence import Evidence, EvidenceKind
from .omega import MullerAutomaton, lift_initial, product
from .qualitative import (
    AvoidSet,
    attractor_graph,
    avoid_set,
    check_sink,
    supplied_avoid_set,
)

log = logging.getLogger(__name__)

STALL_WINDOW = 50
STALL_TOL = 1e-12
DEFAULT_BUDGET = 100_000


class Status(str, Enum):
    CONVERGED = "Converged"
    STALLED = "Stalled"
    BUDGET = "BudgetExhausted"


@dataclass
class ApproxResult:
    lo: object
    hi: object
    iterations: int
    status: Status
    eps: float
    evidence: Evidence | None = None
    prop: str = ""
    sampling: dict | None = None
    breakdown: list = field(default_factory=list)
    history: list | None = field(default=None, repr=False)
    notes: list = field(default_factory=list)

    @property
    def gap(self):
        return self.hi - self.lo

    @property
    def residual(self):
        return self.gap

    @property
    def tainted(self) -> bool:
        return self.evidence is not None and self.evidence.tainted

    def contains(self, value) -> bool:
        return self.lo <= value <= self.hi

    def to_dict(self) -> dict:
        from .report import number

        out = {
            "property": self.prop,
            "interval": [number(self.lo), number(self.hi)],
            "iterations": self.iterations,
            "status": self.status.value,
            "residual": number(self.gap),
            "eps": self.eps,
            "tainted": self.tainted,
            "evidence": self.evidence.to_dict() if self.evidence is not None else None,
            "seed": self.sampling.get("seed") if self.sampling else None,
        }
        if self.sampling:
            out["sampling"] = {k: number(v) if isinstance(v, float) else v
                               for k, v in self.sampling.items()}
        if self.breakdown:
            out["breakdown"] = self.breakdown
        if self.notes:
            out["notes"] = list(self.notes)
        return out


def _as_float(m: ScaledMasses) -> Masses:
    return Masses(m.yes / m.scale, m.no / m.scale, m.escape / m.scale,
                  tuple(w / m.scale for w in m.groups))


def _clip(x, exact):
    zero, one = (Fraction(0), Fraction(1)) if exact else (0.0, 1.0)
    return min(max(x, zero), one)


def run_scheme(estimator, mu, yes, no, *, eps: float, budget: int = DEFAULT_BUDGET,
               escape: EscapeBound | None = None, window: TimeWindow | None = None,
               groups=(), evidence: Evidence | None = None, prop: str = "",
               stall_window: int = STALL_WINDOW, stall_tol: float = STALL_TOL,
               keep_history: bool = False) -> ApproxResult:
    """Shrink ``[P(F<=n yes), 1 - P(not yes U<=n no)]`` until its width drops below ``eps``.

    Sampling estimators widen both ends by their half-width.  Mass stopped in
    an escape region counts ``escape.bound`` towards the upper end.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    sampling = estimator.sampling
    if eps > 1:
        return ApproxResult(0, 1, 0, Status.CONVERGED, eps, evidence, prop, sampling,
                            history=[(0, 1)] if keep_history else None,
                            notes=["eps above 1: the trivial interval suffices"])
    h = estimator.slack
    if h and eps <= 2 * h:
        log.warning("eps=%g cannot be met with sampling half-width %.3g", eps, h)
    beta = escape.bound if escape is not None else 0
    gaps: deque = deque(maxlen=stall_window + 1)
    history = [] if keep_history else None
    status = Status.BUDGET
    n = 0
    lo = hi = None
    scaled_beta = isinstance(beta, (int, Fraction)) and not h
    bn, bd = (Fraction(beta).numerator, Fraction(beta).denominator) if scaled_beta else (0, 1)
    eps_q = Fraction(eps)
    last = None
    for n, m in enumerate(estimator.propagate(mu, yes, no, escape=escape, window=window,
                                              groups=groups)):
        if isinstance(m, ScaledMasses) and not scaled_beta:
            m = _as_float(m)
        if isinstance(m, ScaledMasses):
            # everything over the common denominator D, no gcd until a value is reported
            D = m.scale * bd
            lo_n = min(max(m.yes * bd, 0), D)
            hi_n = min(max(D - m.no * bd - m.escape * (bd - bn), 0), D)
            lo = hi = None
            if history is not None:
                lo, hi = UnreducedFraction(lo_n, D), UnreducedFraction(hi_n, D)
                history.append((lo, hi))
            gaps.append((hi_n - lo_n) / D)
            done = (hi_n - lo_n) * eps_q.denominator < eps_q.numerator * D
            absorbed = m.yes + m.no + m.escape >= m.scale
            last = (lo_n, hi_n, D)
        else:
            exact = isinstance(m.yes, Fraction) and not h and isinstance(beta, (int, Fraction))
            lo = _clip(m.yes - h, exact)
            hi = _clip(1 - m.no - (1 - beta) * m.escape + h, exact)
            if history is not None:
                history.append((lo, hi))
            gaps.append(hi - lo)
            done = hi - lo < eps
            absorbed = m.yes + m.no + m.escape >= 1
            last = None
        if done:
            status = Status.CONVERGED
            break
        if absorbed:
            status = Status.STALLED
            break
        if len(gaps) > stall_window and gaps[0] - gaps[-1] < stall_tol:
            status = Status.STALLED
            break
        if n >= budget:
            break
    group_values = m.groups
    if last is not None:
        lo_n, hi_n, D = last
        lo, hi = Fraction(lo_n, D), Fraction(hi_n, D)
        group_values = tuple(m.fraction(w) for w in m.groups)
    breakdown = []
    if groups:
        breakdown = [{"component": g.name or repr(g), "lower": w if not h else max(w - h, 0.0)}
                     for g, w in zip(groups, group_values)]
    res = ApproxResult(lo, hi, n, status, eps, evidence, prop, sampling, breakdown, history)
    if status is not Status.CONVERGED:
        res.notes.append(f"residual gap {float(res.gap):.6g} after {n} steps")
    return res


def _chain_of(estimator) -> MarkovChain | None:
    chain = getattr(estimator, "chain", None)
    if chain is None:
        chain = getattr(getattr(estimator, "simulator", None), "chain", None)
    return chain


def _evidence(chain, evidence: Evidence | None) -> Evidence:
    if evidence is not None:
        if evidence.tainted:
            log.warning("result rests on assumed evidence: %s", evidence.note)
        return evidence
    if chain is not None and chain.is_finite:
        return Evidence.finite_chain()
    log.warning("no decisiveness evidence supplied; the interval may not bracket the value")
    return Evidence.assumed("no decisiveness evidence supplied")


def validated_avoid_set(chain, B, btilde, roots, *, depth: int = 32) -> StateSet:
    """An avoid-set for ``B``, computed on finite chains and checked otherwise."""
    B = as_stateset(B)
    if btilde is None:
        if chain is None:
            raise Refusal("an avoid-set is needed when the estimator has no explicit chain")
        return avoid_set(chain, B, roots=roots)
    if isinstance(btilde, AvoidSet) or chain is None:
        return as_stateset(btilde)
    btilde = as_stateset(btilde)
    if chain.is_finite:
        bad = check_sink(chain, btilde, chain.states)
        if bad:
            raise SinkViolation(f"supplied avoid-set is not closed: {bad[0][0]!r} -> {bad[0][1]!r}")
        return supplied_avoid_set(chain, btilde, B, roots=chain.states, depth=0)
    return supplied_avoid_set(chain, btilde, B, roots=roots, depth=depth)


def approx_reach(estimator, mu, B, btilde=None, *, eps: float = 1e-6,
                 budget: int = DEFAULT_BUDGET, evidence: Evidence | None = None,
                 escape: EscapeBound | None = None, keep_history: bool = False,
                 **kw) -> ApproxResult:
    """Interval for ``P(F B)``."""
    mu = as_distribution(mu)
    chain = _chain_of(estimator)
    bt = validated_avoid_set(chain, B, btilde, mu.support())
    return run_scheme(estimator, mu, as_stateset(B), bt, eps=eps, budget=budget, escape=escape,
                      evidence=_evidence(chain, evidence), prop="F B",
                      keep_history=keep_history, **kw)


def approx_until(estimator, mu, Bprime, B, btilde=None, *, eps: float = 1e-6,
                 budget: int = DEFAULT_BUDGET, evidence: Evidence | None = None,
                 keep_history: bool = False, **kw) -> ApproxResult:
    """Interval for ``P(B' U B)``; leaving ``B'`` before ``B`` counts as failure."""
    mu = as_distribution(mu)
    chain = _chain_of(estimator)
    B = as_stateset(B)
    bt = validated_avoid_set(chain, B, btilde, mu.support())
    no = bt | as_stateset(Bprime).complement()
    return run_scheme(estimator, mu, B, no, eps=eps, budget=budget,
                      evidence=_evidence(chain, evidence), prop="B' U B",
                      keep_history=keep_history, **kw)


def approx_repeated(estimator, mu, B, btilde=None, btilde2=None, *, eps: float = 1e-6,
                    budget: int = DEFAULT_BUDGET, evidence: Evidence | None = None,
                    keep_history: bool = False, **kw) -> ApproxResult:
    """Interval for ``P(GF B)``: reach the double avoid-set, or fail in the avoid-set."""
    mu = as_distribution(mu)
    chain = _chain_of(estimator)
    B = as_stateset(B)
    bt = validated_avoid_set(chain, B, btilde, mu.support())
    btt = validated_avoid_set(chain, bt, btilde2, mu.support())
    return run_scheme(estimator, mu, btt, bt, eps=eps, budget=budget,
                      evidence=_evidence(chain, evidence), prop="GF B",
                      keep_history=keep_history, **kw)


def _named_union(components) -> list[StateSet]:
    out = []
    for i, C in enumerate(components):
        out.append(StateSet.explicit(C, name=f"bscc{i}"))
    return out


def quant_omega_attractor(chain: MarkovChain, mu, dma: MullerAutomaton, *, eps: float = 1e-6,
                          budget: int = DEFAULT_BUDGET, attractor=None, estimator=None,
                          depth: int | None = None, evidence: Evidence | None = None,
                          keep_history: bool = False) -> ApproxResult:
    """Interval for the Muller probability through the attractor graph of the product.

    The target is the union of the good bottom components; the graph's
    components are mutually unreachable, so the per-component masses add up.
    """
    prod = product(chain, dma)
    mu2 = lift_initial(mu, dma)
    if attractor is None:
        if not chain.is_finite:
            raise Refusal("an infinite chain needs an explicit finite attractor of the product")
        attractor = StateSet.explicit(explore(prod, mu2.support()))
    attractor = as_stateset(attractor)
    graph = attractor_graph(prod, attractor, mu=mu2, depth=depth)
    good_idx = graph.good(dma)
    good = [graph.components[i] for i in good_idx]
    target = StateSet.explicit(s for C in good for s in C)
    if prod.is_finite:
        no = avoid_set(prod, target)
        base = Evidence.finite_chain()
    else:
        no = StateSet.explicit(s for i, C in enumerate(graph.components) if i not in good_idx
                               for s in C)
        base = evidence if evidence is not None else Evidence.assumed(
            "attractor of an infinite product taken as declared")
    ev = base.supporting(EvidenceKind.FINITE_ATTRACTOR,
                         f"attractor graph with {len(graph.components)} bottom components, "
                         f"{len(good)} good")
    est = estimator.for_product(dma) if estimator is not None else ExactEstimator(prod)
    groups = _named_union(good)
    res = run_scheme(est, mu2, target, no, eps=eps, budget=budget, groups=groups, evidence=ev,
                     prop="Inf in F", keep_history=keep_history)
    res.notes.append(f"{len(good)} of {len(graph.components)} bottom components are good")
    return res


def quant_omega_abstraction(estimator, handle, mu, dma: MullerAutomaton, *, eps: float = 1e-6,
                            budget: int = DEFAULT_BUDGET, keep_history: bool = False,
                            escape: EscapeBound | None = None) -> ApproxResult:
    """Muller probability of a concrete system through a sound finite abstraction.

    Good components are found in the abstract product; the concrete scheme
    then targets their preimage, with the preimage of the abstract avoid-set
    as its no-set.
    """
    from .abstraction import Soundness, lift_alpha_to_product, pushforward

    if handle.soundness is not Soundness.CERTIFIED and handle.override is None:
        raise Refusal("abstraction is not certified sound; certify it or override explicitly")
    prod2 = product(handle.abstract, dma)
    alpha2 = lift_alpha_to_product(handle.alpha, dma)
    mu_c = estimator.lift(mu, dma)
    mu_a = pushforward(alpha2, mu_c)
    if not prod2.is_finite:
        raise Refusal("the abstract chain must be finite")
    attractor = StateSet.explicit(explore(prod2, mu_a.support()))
    graph = attractor_graph(prod2, attractor, mu=mu_a)
    good_idx = graph.good(dma)
    good_union = StateSet.explicit(s for i in good_idx for s in graph.components[i])
    abstract_no = avoid_set(prod2, good_union)
    yes = alpha2.preimage(good_union, name="alpha^-1(good)")
    no = alpha2.preimage(abstract_no, name="alpha^-1(avoid)")
    groups = [alpha2.preimage(StateSet.explicit(graph.components[i]), name=f"alpha^-1(bscc{i})")
              for i in good_idx]
    premise = handle.evidence if handle.evidence is not None else Evidence.assumed(
        handle.override or "soundness overridden")
    ev = premise.supporting(EvidenceKind.SOUND_ABSTRACTION,
                            f"abstract product has {len(graph.components)} bottom components, "
                            f"{len(good_idx)} good")
    est = estimator.for_product(dma)
    res = run_scheme(est, mu_c, yes, no, eps=eps, budget=budget, escape=escape, groups=groups,
                     evidence=ev, prop="Inf in F", keep_history=keep_history)
    res.notes.append(f"{len(good_idx)} of {len(graph.components)} abstract bottom components are good")
    return res


def time_bounded_reach(estimator, mu, B, interval: TimeInterval | str, *, eps: float = 1e-6,
                       budget: int = DEFAULT_BUDGET, btilde=None, evidence: Evidence | None = None,
                       keep_history: bool = False) -> ApproxResult:
    """Interval for reaching ``B`` at a time point inside ``interval``.

    Runs whose clock passes ``sup I + 1`` are counted as failures, which
    terminates the scheme on non-Zeno systems.
    """
    if isinstance(interval, str):
        interval = TimeInterval.parse(interval)
    ev = evidence if evidence is not None else estimator.time_evidence()
    sampling = estimator.sampling
    if interval.empty:
        return ApproxResult(Fraction(0), Fraction(0), 0, Status.CONVERGED, eps, ev, "F_I B",
                            sampling, notes=["empty time interval"])
    window = TimeWindow(interval, interval.hi + 1)
    no = as_stateset(btilde) if btilde is not None else StateSet.nothing()
    return run_scheme(estimator, mu, as_stateset(B), no, eps=eps, budget=budget, window=window,
                      evidence=ev, prop=f"F_{interval} B", keep_history=keep_history)
