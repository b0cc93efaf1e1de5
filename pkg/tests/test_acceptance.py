"""Acceptance criteria 1-10, one PASS/FAIL line each in the terminal summary.

Every criterion gets one test that records its verdict.  Where part of a
criterion cannot hold for this model (criteria 5 and 6), that part runs as its own
test that asserts the claim and is marked ``xfail(strict=True)``.  The
assertion really runs and really fails.  The criterion line then reads FAIL
and the observed value goes in the detail.  If the claim ever starts to hold,
the strict marker turns the run red so the verdict gets revisited.
"""

import math
import random
import subprocess
import sys
import time
from fractions import Fraction as F
from pathlib import Path

import pytest

from decisive.abstraction import (AbstractionHandle, certify_complete, check_abstraction,
                                  soundness_witness_search)
from decisive.core import FiniteChain, SparseDistribution, StateSet, exact_reachability_finite, explore
from decisive.errors import Refusal
from decisive.estimators import ChainSimulator, MonteCarloEstimator
from decisive.evidence import Evidence
from decisive.models import (random_walk, truncated_walk, unfair_chain, unfair_return_probability,
                             walk_escape, walk_tf_handle)
from decisive.omega import MullerAutomaton, letters, lift_initial, muller_probability_exact, product
from decisive.qualitative import attractor_graph, bsccs, good_bsccs
from decisive.quantitative import (ExactEstimator, Status, approx_reach, approx_repeated,
                                   quant_omega_attractor)
from decisive.sta.analysis import GENERAL_REFUSAL, _configs, sta_check_qualitative, sta_time_bounded
from decisive.sta.library import (exponential_self_loop, jump_probability, pacman_escape, pacman_sta,
                                  pacman_reach_probability)
from decisive.sta.sampler import StaSimulator, location_set, min_jumps
from decisive.sta.thickgraph import thick_graph


MODELS = Path(__file__).resolve().parent.parent / "models"
NOTHING = StateSet.nothing()
d = SparseDistribution.dirac

RESULTS: dict = {}


def record(n, part, ok, detail=""):
    RESULTS.setdefault(n, []).append((part, bool(ok), detail))


def summary_lines():
    lines = []
    for n in range(1, 11):
        parts = RESULTS.get(n)
        if not parts:
            lines.append(f"criterion {n:2d}: FAIL (not run)")
            continue
        verdict = "PASS" if all(ok for _, ok, _ in parts) else "FAIL"
        detail = "; ".join(f"{p}: {'ok' if ok else 'red'}{' (' + x + ')' if x else ''}"
                           for p, ok, x in parts)
        lines.append(f"criterion {n:2d}: {verdict}  {detail}")
    return lines


# ---- random finite models ------------------------------------------------------

def random_chain(rng: random.Random, max_states: int, ap=("a", "b")) -> FiniteChain:
    n = rng.randint(1, max_states)
    rows = {}
    for s in range(n):
        succ = rng.sample(range(n), rng.randint(1, min(4, n)))
        w = [rng.randint(1, 6) for _ in succ]
        rows[s] = {t: F(x, sum(w)) for t, x in zip(succ, w)}
    labels = {s: {a for a in ap if rng.random() < 0.5} for s in range(n)}
    return FiniteChain(rows, labels=labels, ap=ap)


def random_distribution(rng: random.Random, states) -> SparseDistribution:
    support = rng.sample(list(states), rng.randint(1, min(3, len(states))))
    w = [rng.randint(1, 5) for _ in support]
    return SparseDistribution({s: F(x, sum(w)) for s, x in zip(support, w)})


def random_dma(rng: random.Random, ap=("a", "b"), max_locations: int = 3) -> MullerAutomaton:
    locs = [f"q{i}" for i in range(rng.randint(1, max_locations))]
    edges = [(q, u, rng.choice(locs)) for q in locs for u in letters(ap)]
    subsets = [frozenset(l for i, l in enumerate(locs) if mask >> i & 1)
               for mask in range(1, 2 ** len(locs))]
    family = {F_ for F_ in subsets if rng.random() < 0.4}
    return MullerAutomaton(locs, "q0", edges, family, ap)


def gf_oracle(chain, mu, B):
    hit = set()
    for C in bsccs(chain):
        if C & set(B):
            hit |= C
    if not hit:
        return F(0)
    x = exact_reachability_finite(chain, hit)
    return sum(p * x[s] for s, p in mu.items())


def cli_bytes(*argv) -> bytes:
    proc = subprocess.run([sys.executable, "-m", "decisive.cli", *argv], capture_output=True,
                          check=False)
    return proc.stdout


# ---- criteria ------------------------------------------------------------------

def test_1_recurrent_walk_converges():
    t0 = time.perf_counter()
    res = approx_reach(ExactEstimator(random_walk(F(1, 3)), exact=False), d(1), {0}, NOTHING,
                       eps=1e-3, evidence=Evidence.assumed("recurrent walk"))
    elapsed = time.perf_counter() - t0
    oracle = exact_reachability_finite(truncated_walk(F(1, 3), 10_000), {0}, exact=False)[1]
    ok = (res.status is Status.CONVERGED and res.contains(1) and elapsed < 5
          and abs(oracle - 1) < 1e-9)
    record(1, "converges, contains 1, < 5 s", ok,
           f"[{float(res.lo):.6f}, {float(res.hi):.6f}] in {elapsed:.2f}s, truncated oracle {oracle:.9f}")
    assert ok


def test_2_transient_walk_is_diagnosed():
    res = approx_reach(ExactEstimator(random_walk(F(2, 3)), exact=False), d(1), {0}, NOTHING,
                       eps=1e-3, budget=10_000, evidence=Evidence.assumed("none"))
    closed = (1 - F(2, 3)) / F(2, 3)
    rows = {0: {0: 1}, 400: {400: 1}}
    rows.update({i: {i + 1: F(2, 3), i - 1: F(1, 3)} for i in range(1, 400)})
    truncated = exact_reachability_finite(FiniteChain(rows), {0}, exact=False)[1]
    ok = (res.status in (Status.STALLED, Status.BUDGET) and 0.499 <= res.lo <= 0.501
          and closed == F(1, 2) and abs(truncated - 0.5) < 1e-9)
    record(2, "Stalled/Budget with lower end near 1/2", ok,
           f"{res.status.value} after {res.iterations}, lo={float(res.lo):.6f}, truncated {truncated:.9f}")
    assert ok


def test_3_finite_chains_bracketed_at_every_iteration():
    rng = random.Random(3)
    t0 = time.perf_counter()
    violations = 0
    for _ in range(100):
        chain = random_chain(rng, 20)
        mu = random_distribution(rng, chain.states)
        B = {s for s in chain.states if rng.random() < 0.3}
        x = exact_reachability_finite(chain, B)
        reach = sum(p * x[s] for s, p in mu.items())
        r = approx_reach(ExactEstimator(chain), mu, B, eps=1e-6, keep_history=True)
        g = approx_repeated(ExactEstimator(chain), mu, B, eps=1e-6, keep_history=True)
        gf = gf_oracle(chain, mu, B)
        violations += sum(not (lo <= reach <= hi) for lo, hi in r.history)
        violations += sum(not (lo <= gf <= hi) for lo, hi in g.history)
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and elapsed < 30
    record(3, "100 chains, zero violations, < 30 s", ok, f"{violations} violations in {elapsed:.1f}s")
    assert ok


def test_4_muller_decomposition():
    rng = random.Random(4)
    bad_sum = bad_approx = 0
    largest = 0
    for _ in range(100):
        chain = random_chain(rng, 10)
        dma = random_dma(rng)
        mu = random_distribution(rng, chain.states)
        prod, mu2 = product(chain, dma), lift_initial(mu, dma)
        reach = explore(prod, mu2.support())
        largest = max(largest, len(reach))
        g = attractor_graph(prod, StateSet.explicit(reach), mu=mu2)
        total = F(0)
        for C in good_bsccs(g, dma):
            x = exact_reachability_finite(prod, C)
            total += sum(p * x[s] for s, p in mu2.items())
        exact = muller_probability_exact(prod, mu2)
        bad_sum += total != exact
        res = quant_omega_attractor(chain, mu, dma, eps=1e-6)
        bad_approx += not (res.status is Status.CONVERGED and res.contains(exact) and res.gap <= 1e-6)
    ok = bad_sum == 0 and bad_approx == 0 and largest <= 30
    record(4, "good-component sum = exact, attractor scheme within 1e-6", ok,
           f"{bad_sum} sum mismatches, {bad_approx} interval misses, largest product {largest}")
    assert ok


def test_5_witness_search_dichotomy():
    bad = walk_tf_handle(F(2, 3))
    est = MonteCarloEstimator(ChainSimulator(bad.concrete), samples=1000, confidence=0.99, seed=5)
    ce = soundness_witness_search(bad, d(1), estimator=est, confidence=0.99, max_samples=1_000_000,
                                  escape=walk_escape(F(2, 3), K=24, target_max=1))
    found = ce is not None and ce.abstract_value == 1 and ce.upper < 1 and ce.samples <= 1_000_000
    record(5, "p=2/3 counterexample at 99%", found,
           f"target {sorted(ce.target)} upper {ce.upper:.4f} from {ce.samples} samples" if ce else "none")

    good = walk_tf_handle(F(1, 3))
    est = MonteCarloEstimator(ChainSimulator(good.concrete), samples=1000, confidence=0.99, seed=5)
    none = soundness_witness_search(good, d(1), estimator=est, confidence=0.99,
                                    max_samples=1_000_000) is None
    record(5, "p=1/3 default catalogue clean", none)
    assert found and none


@pytest.mark.xfail(strict=True, reason="state 3 of the walk only moves inside the fiber of s2 "
                                       "while s2 also moves to s1, so the one-step check fails")
def test_5_walk_passes_abstraction_and_completeness_checks():
    h = walk_tf_handle(F(1, 3))
    check = check_abstraction(h, bound=64)
    complete = certify_complete(h)
    record(5, "check_abstraction + certify_complete", bool(check) and bool(complete),
           f"offending {check.offending[0][:2]}" if not check else "")
    assert check and complete


def test_6_pacman_refusal_and_estimate():
    sta = pacman_sta()
    gf = MullerAutomaton(["n", "g"], "n",
                         [("n", frozenset(), "n"), ("n", frozenset({"goal"}), "g"),
                          ("g", frozenset(), "n"), ("g", frozenset({"goal"}), "g")],
                         [{"g"}, {"n", "g"}], ["goal"])
    try:
        sta_check_qualitative(sta, gf)
        refused, msg = False, "no refusal"
    except Refusal as exc:
        refused, msg = str(exc).startswith(GENERAL_REFUSAL), str(exc)
    record(6, "General-class refusal", refused, msg.split(" (")[0])

    est = MonteCarloEstimator(StaSimulator(sta), samples=1_000_000, confidence=0.99, seed=6)
    res = approx_reach(est, _configs(sta, None), location_set(sta, ["l2"]), NOTHING,
                       escape=pacman_escape(sta, 1e-3), eps=0.01,
                       evidence=Evidence.assumed("y drifts up to 1, so runs enter the escape region"))
    below = res.hi < 1
    record(6, "P(F l2) < 1 at 99% with 1e6 samples", below,
           f"[{res.lo:.4f}, {res.hi:.4f}], closed form {pacman_reach_probability(0.5):.4f}")
    assert refused and below and res.contains(pacman_reach_probability(0.5))


EVEN_SPLIT_SHAPE = {("l0", "l1"): F(1, 2), ("l0", "l3"): F(1, 2), ("l1", "l2"): 1, ("l2", "l0"): 1,
              ("l3", "l4"): 1, ("l4", "l0"): 1}


def _isomorphic(chain_states, succ, edges):
    """Brute-force labelled isomorphism between two small weighted digraphs (labels = locations)."""
    import itertools

    nodes = sorted({a for a, _ in edges} | {b for _, b in edges})
    if len(chain_states) != len(nodes):
        return False
    for perm in itertools.permutations(chain_states):
        m = dict(zip(nodes, perm))
        if any(m[n][0] != n for n in nodes):
            continue
        got = {(a, b): succ(m[a]).get(m[b], 0) for a in nodes for b in nodes}
        if all(got[k] == edges.get(k, 0) for k in got):
            return True
    return False


@pytest.mark.xfail(strict=True, reason="from l0 the y-delay also crosses x=1 inside 1<y<2, "
                                       "which splits l3 into two regions and the branching into thirds")
def test_6_pacman_thick_graph_has_five_states_with_even_split():
    tg = thick_graph(pacman_sta())
    succ = lambda s: dict(tg.chain.successors(s))  # noqa: E731
    iso = _isomorphic(list(tg.states), succ, EVEN_SPLIT_SHAPE)
    branching = sorted(str(p) for p in tg.chain.successors(tg.initial).values())
    record(6, "thick graph is the 5-state even-split loop pair", iso,
           f"{len(tg.states)} states, branching {branching}")
    assert iso


def test_7_structural_laws_run_1000_cases():
    from hypothesis import settings

    import test_lemmas

    names = [n for n in dir(test_lemmas) if n.startswith("test_")]
    counts = {n: getattr(test_lemmas, n)._hypothesis_internal_use_settings.max_examples for n in names}
    ok = len(names) == 7 and all(c >= 1000 for c in counts.values())
    assert settings.get_profile("lemmas").max_examples == 1000
    record(7, "seven exact-mode laws configured for 1000 cases", ok, ", ".join(n[5:] for n in names))
    assert ok


def test_8_unfair_chain_taint():
    everything = StateSet.predicate(lambda s: True)
    res = approx_repeated(ExactEstimator(unfair_chain(), exact=False), d("b"), {"b"}, NOTHING,
                          everything, eps=1e-6, evidence=Evidence.assumed("fairness"))
    r = unfair_return_probability(1e-13)
    prod = math.prod(1 - 3.0 ** -n for n in range(1, 60))
    oracle = 0.0  # P(GF b) = lim r^k
    ok = res.tainted and res.lo - oracle >= 1 - 1e-9 and abs(r - (1 - prod)) < 1e-12
    record(8, "tainted and off from P(GF b)=0", ok,
           f"interval [{float(res.lo)}, {float(res.hi)}], return probability {r:.12f}")
    assert ok


def test_9_time_bounded_coverage():
    details, ok = [], True
    for rate, T in ((1.0, 1.0), (2.0, 0.5)):
        sta = exponential_self_loop(rate)
        truth = jump_probability(rate, T)
        res = sta_time_bounded(sta, None, min_jumps(1), f"[0,{T}]", eps=0.05, samples=20_000, seed=9,
                               confidence=0.95)
        covered = 0
        for seed in range(200):
            r = sta_time_bounded(sta, None, min_jumps(1), f"[0,{T}]", eps=0.5, samples=500,
                                 seed=seed, confidence=0.95)
            covered += r.contains(truth)
        ok &= res.contains(truth) and covered / 200 >= 0.93
        details.append(f"(rate {rate}, T {T}): [{res.lo:.4f}, {res.hi:.4f}] vs {truth:.4f}, "
                       f"coverage {covered / 200:.3f}")
    record(9, "brackets 1-exp(-rate T), 95% coverage >= 0.93", ok, "; ".join(details))
    assert ok


def test_10_cli_runs_are_byte_identical():
    runs = {
        5: ["witness-unsound", "--handle", str(MODELS / "walk-tf.json"), "--p", "2/3", "--init", "1",
            "--seed", "10", "--threads", "2"],
        6: ["witness-unsound", "--handle", str(MODELS / "pacman-tg.json"), "--seed", "10",
            "--threads", "2"],
        9: ["sta-time-bounded", "--model", str(MODELS / "exp-loop.json"), "--min-jumps", "1",
            "--interval", "[0,1]", "--samples", "20000", "--eps", "0.05", "--seed", "10",
            "--threads", "2"],
    }
    same = {}
    for n, argv in runs.items():
        a, b = cli_bytes(*argv), cli_bytes(*argv)
        same[n] = bool(a) and a == b
    ok = all(same.values())
    record(10, "criteria 5, 6, 9 byte-identical", ok,
           ", ".join(f"{n}: {'same' if v else 'differs'}" for n, v in same.items()))
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
