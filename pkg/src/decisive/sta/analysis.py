"""Classification of STA, their attractors, and the end-to-end analyses."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from ..abstraction import (
    AbstractionHandle,
    certify_sound_via_decisiveness,
    check_abstraction,
    pushforward,
)
from ..core import SparseDistribution, StateSet, as_distribution, as_stateset, explore
from ..errors import DeadlockedConfiguration, InvalidModel, Refusal
from ..estimators import MonteCarloEstimator, TimeInterval
from ..evidence import Evidence, EvidenceKind
from ..omega import MullerAutomaton
from ..qualitative import Verdict, almost_sure_omega, is_attractor
from ..quantitative import DEFAULT_BUDGET, ApproxResult, quant_omega_abstraction, time_bounded_reach
from . import regions as R
from .model import StaModel
from .sampler import StaSimulator, location_set
from .thickgraph import ThickGraph, delay_moves, thick_graph

GENERAL_REFUSAL = "thick graph unsound: STA class General"


class StaKind(str, Enum):
    REACTIVE = "Reactive"
    ONE_CLOCK = "OneClock"
    GENERAL = "General"


@dataclass
class StaClass:
    kind: StaKind
    reasons: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"class": self.kind.value, "reasons": list(self.reasons)}


def _reactive_failures(sta: StaModel) -> list[str]:
    out = []
    for l in sta.locations:
        if sta.dists[l].kind != "exponential":
            out.append(f"{l}: {sta.dists[l].kind} delays cannot cover every delay")
    if out:
        return out
    M = sta.max_const
    for r in R.all_regions(len(sta.clocks), M):
        for rd in R.delay_regions(r, M):
            for l in sta.locations:
                if not any(R.satisfies(e.guard, sta.clocks, rd, M) for e in sta.out_edges[l]):
                    out.append(f"{l}: no edge enabled in {rd.describe(sta.clocks, M)}")
                    return out
    return out


def _one_clock_failures(sta: StaModel) -> list[str]:
    if len(sta.clocks) != 1:
        return [f"{len(sta.clocks)} clocks"]
    out = []
    for l in sta.locations:
        if sta.dists[l].kind == "dirac":
            out.append(f"{l}: Dirac delays are not continuous in the valuation")
    M = sta.max_const
    for l in sta.locations:
        for r in R.all_regions(1, M):
            try:
                _, punctual = delay_moves(sta, l, r)
            except DeadlockedConfiguration:
                continue
            except InvalidModel as exc:
                out.append(str(exc))
                continue
            if punctual:
                out.append(f"{l}: only punctual delays from {r.describe(sta.clocks, M)}")
    return out


def classify(sta: StaModel) -> StaClass:
    """Reactive, one-clock with well-behaved delays, or general."""
    reasons = []
    fail = _reactive_failures(sta)
    if not fail:
        return StaClass(StaKind.REACTIVE, ["exponential delays and every delay enables an edge"])
    reasons.append("not reactive: " + fail[0])
    fail = _one_clock_failures(sta)
    if not fail:
        return StaClass(StaKind.ONE_CLOCK,
                        reasons + ["one clock, uniform delays on bounded sets, exponential otherwise"])
    reasons.append("not one-clock: " + fail[0])
    return StaClass(StaKind.GENERAL, reasons)


def memoryless_regions(sta: StaModel) -> list[R.Region]:
    return [r for r in R.all_regions(len(sta.clocks), sta.max_const) if r.memoryless]


def _checked_attractor(tg: ThickGraph, A: StateSet, note: str) -> StateSet:
    if not is_attractor(tg.chain, A):
        raise Refusal(f"{note}: not an attractor of the thick graph")
    return A


def memoryless_attractor(sta: StaModel, tg: ThickGraph | None = None) -> StateSet:
    """Thick-graph states whose region is memoryless (every clock is 0 or above the maximal constant)."""
    cls = classify(sta)
    if cls.kind is not StaKind.REACTIVE:
        raise Refusal(f"memoryless attractor needs a reactive STA; class is {cls.kind.value}")
    tg = tg or thick_graph(sta)
    A = StateSet.explicit((s for s in tg.states if s[1].memoryless), name="memoryless")
    return _checked_attractor(tg, A, "memoryless regions")


def oneclock_attractor(sta: StaModel, tg: ThickGraph | None = None) -> StateSet:
    """States in the zero region, plus states that can never change region again."""
    cls = classify(sta)
    if cls.kind is not StaKind.ONE_CLOCK:
        raise Refusal(f"one-clock attractor needs a one-clock STA; class is {cls.kind.value}")
    tg = tg or thick_graph(sta)
    zero = R.region_of((0,), sta.max_const)
    members = []
    for s in tg.states:
        if s[1] == zero or all(t[1] == s[1] for t in explore(tg.chain, [s])):
            members.append(s)
    return _checked_attractor(tg, StateSet.explicit(members, name="A_max"), "one-clock attractor")


def _class_evidence(sta: StaModel, cls: StaClass, tg: ThickGraph) -> Evidence:
    if cls.kind is StaKind.REACTIVE:
        A = memoryless_attractor(sta, tg)
        note = ("reactive STA: memoryless regions form a finite attractor; fiber-uniform "
                "bounds taken from the reactive-case argument")
    elif cls.kind is StaKind.ONE_CLOCK:
        A = oneclock_attractor(sta, tg)
        note = ("one-clock STA: zero region and region-stable states form a finite attractor; "
                "fiber-uniform bounds taken from the one-clock argument")
    else:
        raise Refusal(GENERAL_REFUSAL)
    return Evidence(EvidenceKind.STA_CLASS, note, declared=True, attractor=A)


def sta_handle(sta: StaModel, roots=(), *, samples: int = 4, seed: int = 0,
               certify: bool = True) -> tuple[AbstractionHandle, ThickGraph, StaClass]:
    """Thick-graph abstraction of ``sta``, checked and, when the class allows, certified sound."""
    tg = thick_graph(sta, roots)
    handle = AbstractionHandle(sta, tg.chain, tg.alpha(samples, seed))
    check_abstraction(handle)
    cls = classify(sta)
    handle.notes.append(f"STA class {cls.kind.value}")
    if certify and cls.kind is not StaKind.GENERAL and handle.is_abstraction:
        certify_sound_via_decisiveness(handle, _class_evidence(sta, cls, tg))
    return handle, tg, cls


def _configs(sta: StaModel, mu) -> SparseDistribution:
    if mu is None:
        return SparseDistribution.dirac(sta.initial_config(), exact=False)
    mu = as_distribution(mu)
    return SparseDistribution({(l, tuple(float(x) for x in v)): float(p) for (l, v), p in mu.items()},
                              exact=False)


def sta_check_qualitative(sta: StaModel, dma: MullerAutomaton, mu=None) -> Verdict:
    """Whether the STA satisfies the automaton almost surely, decided on the thick graph."""
    cls = classify(sta)
    if cls.kind is StaKind.GENERAL:
        raise Refusal(f"{GENERAL_REFUSAL} ({'; '.join(cls.reasons)})")
    mu = _configs(sta, mu)
    handle, tg, _ = sta_handle(sta, roots=mu.support())
    if not handle.is_abstraction:
        raise Refusal(f"thick graph failed the abstraction check: {handle.check.offending[0]!r}")
    mu_a = pushforward(handle.alpha, mu)
    verdict = almost_sure_omega(tg.chain, mu_a, dma, evidence=handle.evidence)
    return Verdict(verdict.value, "A |= M almost surely", verdict.evidence,
                   verdict.notes + (f"STA class {cls.kind.value}",
                                    f"thick graph with {len(tg.states)} states"))


def _estimator(sta: StaModel, samples, confidence, seed, workers, threads,
               non_zeno: Evidence | None = None) -> MonteCarloEstimator:
    return MonteCarloEstimator(StaSimulator(sta, non_zeno=non_zeno), samples=samples,
                               confidence=confidence, seed=seed, workers=workers, threads=threads)


def sta_approx_quantitative(sta: StaModel, mu, dma: MullerAutomaton, *, eps: float = 1e-2,
                            samples: int = 100_000, confidence: float = 0.99, seed: int = 0,
                            workers: int = 1, threads: int = 1,
                            budget: int = DEFAULT_BUDGET) -> ApproxResult:
    """Interval for the probability that the STA satisfies the automaton."""
    cls = classify(sta)
    if cls.kind is StaKind.GENERAL:
        raise Refusal(f"{GENERAL_REFUSAL} ({'; '.join(cls.reasons)})")
    mu = _configs(sta, mu)
    handle, _, _ = sta_handle(sta, roots=mu.support())
    est = _estimator(sta, samples, confidence, seed, workers, threads)
    res = quant_omega_abstraction(est, handle, mu, dma, eps=eps, budget=budget)
    res.notes.append(f"STA class {cls.kind.value}")
    return res


def sta_time_bounded(sta: StaModel, mu, B, interval: TimeInterval | str, *, eps: float = 1e-2,
                     samples: int = 100_000, confidence: float = 0.99, seed: int = 0,
                     workers: int = 1, threads: int = 1, budget: int = DEFAULT_BUDGET,
                     non_zeno: Evidence | None = None) -> ApproxResult:
    """Interval for reaching ``B`` (locations or a state set) at a time inside ``interval``."""
    if non_zeno is None:
        cls = classify(sta)
        if cls.kind is not StaKind.REACTIVE:
            raise Refusal("time-bounded analysis needs a reactive STA or declared non-Zeno evidence")
        non_zeno = Evidence.non_zeno("reactive STA are almost surely non-Zeno", declared=False)
    if isinstance(B, (set, frozenset, list, tuple)):
        B = location_set(sta, B)
    est = _estimator(sta, samples, confidence, seed, workers, threads, non_zeno)
    return time_bounded_reach(est, _configs(sta, mu), as_stateset(B), interval, eps=eps,
                              budget=budget, evidence=non_zeno)
