import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from decisive.core import FiniteChain, SparseDistribution, StateSet, exact_reachability_finite
from decisive.errors import Refusal, SinkViolation
from decisive.estimators import ChainSimulator, ExactEstimator, MonteCarloEstimator, hoeffding
from decisive.evidence import Evidence
from decisive.formulas import bounded_event_probability, eventually
from decisive.abstraction import AbstractionHandle, certify_sound_via_decisiveness, check_abstraction, identity_alpha
from decisive.models import (always_a_dma, random_walk, tf_chain, truncated_walk, two_sinks_chain,
                             unfair_chain, unfair_return_probability)
from decisive.omega import lift_initial, muller_probability_exact, product
from decisive.qualitative import bsccs
from decisive.quantitative import (Status, approx_reach, approx_repeated, approx_until,
                                   quant_omega_abstraction, quant_omega_attractor, time_bounded_reach)

from conftest import distributions, finite_chains, muller_automata, state_sets

d = SparseDistribution.dirac
NOTHING = StateSet.nothing()


def repeated_oracle(chain, mu, B):
    """``P(GF B)``: mass absorbed in bottom components that meet ``B``."""
    hit = set()
    for C in bsccs(chain):
        if C & set(B):
            hit |= C
    if not hit:
        return F(0)
    x = exact_reachability_finite(chain, hit)
    return sum(p * x[s] for s, p in mu.items())


def test_walk_recurrent_converges():
    est = ExactEstimator(random_walk(F(1, 3)), exact=False)
    res = approx_reach(est, d(1), {0}, NOTHING, eps=1e-3, evidence=Evidence.assumed("recurrent"))
    assert res.status is Status.CONVERGED
    assert res.contains(1) and res.gap < 1e-3


def test_walk_transient_stalls_at_half():
    est = ExactEstimator(random_walk(F(2, 3)), exact=False)
    res = approx_reach(est, d(1), {0}, NOTHING, eps=1e-3, budget=10_000,
                       evidence=Evidence.assumed("none"))
    assert res.status is not Status.CONVERGED
    assert res.gap >= 0.5 - 1e-3
    assert 0.499 <= res.lo <= 0.501
    assert abs(absorbing_walk_oracle(F(2, 3), 200) - 0.5) < 1e-9


def absorbing_walk_oracle(p, N):
    """``P(F 0)`` from 1 on the walk cut at ``N``, with ``N`` absorbing and never reaching 0."""
    rows = {0: {0: 1}, N: {N: 1}}
    rows.update({i: {i + 1: p, i - 1: 1 - p} for i in range(1, N)})
    return float(exact_reachability_finite(FiniteChain(rows), {0})[1])


def test_start_inside_target():
    est = ExactEstimator(tf_chain())
    res = approx_reach(est, d("s0"), {"s0"}, eps=1e-6)
    assert (res.lo, res.hi, res.iterations) == (1, 1, 0)


def test_until_degenerates_to_reach():
    c = two_sinks_chain()
    everything = StateSet.predicate(lambda s: True)
    a = approx_until(ExactEstimator(c), d("c"), everything, {"a"}, eps=1e-9)
    b = approx_reach(ExactEstimator(c), d("c"), {"a"}, eps=1e-9)
    assert (a.lo, a.hi) == (b.lo, b.hi)


def test_until_on_walk():
    w = random_walk(F(1, 3))
    res = approx_until(ExactEstimator(w), d(1), {1, 2}, {0}, NOTHING, eps=1e-9,
                       evidence=Evidence.assumed("leaving {1,2} ends the run"))
    rows = {0: {0: 1}, 3: {3: 1}, 1: {0: F(2, 3), 2: F(1, 3)}, 2: {1: F(2, 3), 3: F(1, 3)}}
    oracle = exact_reachability_finite(FiniteChain(rows), {0})[1]
    assert oracle == F(6, 7)
    assert res.contains(oracle) and res.gap < 1e-9


def test_until_left_set_misses_start():
    res = approx_until(ExactEstimator(tf_chain()), d("s1"), {"s2"}, {"s0"}, eps=1e-6)
    assert (res.lo, res.hi) == (0, 0)


def test_repeated_examples():
    res = approx_repeated(ExactEstimator(tf_chain()), d("s1"), {"s0"}, eps=1e-6)
    assert res.status is Status.CONVERGED and res.contains(1) and res.hi == 1
    res = approx_repeated(ExactEstimator(two_sinks_chain()), d("c"), {"a"}, eps=1e-6)
    assert res.contains(F(1, 2)) and res.gap < 1e-6


def test_unfair_chain_result_is_tainted_and_wrong():
    everything = StateSet.predicate(lambda s: True)
    res = approx_repeated(ExactEstimator(unfair_chain(), exact=False), d("b"), {"b"},
                          NOTHING, everything, eps=1e-6, evidence=Evidence.assumed("fairness"))
    assert res.tainted
    assert res.status is Status.CONVERGED and res.lo == 1
    r = unfair_return_probability(1e-13)
    assert 0.43 < r < 0.45
    # P(GF b) = lim r^k = 0: the scheme's answer is off by 1
    assert res.lo - 0 == 1


def test_supplied_avoid_set_is_checked():
    with pytest.raises(SinkViolation):
        approx_reach(ExactEstimator(two_sinks_chain()), d("c"), {"a"}, {"c"})


def test_omega_attractor_examples():
    w = truncated_walk(F(1, 3), 30)
    res = quant_omega_attractor(w, d(0), always_a_dma(), eps=1e-6)
    assert res.contains(1)
    oracle = muller_probability_exact(product(w, always_a_dma()), lift_initial(d(0), always_a_dma()))
    assert oracle == 1
    none = quant_omega_attractor(w, d(0), always_a_dma().with_muller([]), eps=1e-6)
    assert (none.lo, none.hi) == (0, 0)


def test_omega_abstraction_identity_agrees():
    c = two_sinks_chain()
    from decisive.omega import MullerAutomaton, letters
    q = ["seen", "unseen"]
    edges = [(p, u, "seen" if "a" in u else "unseen") for p in q for u in letters({"a"})]
    dma = MullerAutomaton(q, "unseen", edges, [{"seen"}], ap={"a"})
    h = AbstractionHandle(c, c, identity_alpha(c.states))
    assert check_abstraction(h)
    certify_sound_via_decisiveness(h, Evidence.finite_chain())
    a = quant_omega_abstraction(ExactEstimator(c), h, d("c"), dma, eps=1e-9)
    b = quant_omega_attractor(c, d("c"), dma, eps=1e-9)
    assert (a.lo, a.hi) == (b.lo, b.hi)
    assert a.contains(F(1, 2))


def test_omega_abstraction_needs_soundness():
    c = two_sinks_chain()
    h = AbstractionHandle(c, c, identity_alpha(c.states))
    with pytest.raises(Refusal):
        quant_omega_abstraction(ExactEstimator(c), h, d("c"), always_a_dma(), eps=1e-3)


def test_time_bounded_empty_interval():
    res = time_bounded_reach(ExactEstimator(tf_chain()), d("s1"), {"s0"}, "(1,1)")
    assert (res.lo, res.hi) == (0, 0)


@given(st.data())
def test_time_bounded_discrete_matches_bounded_event(data):
    chain = data.draw(finite_chains(max_states=8))
    mu = data.draw(distributions(chain.states))
    B = data.draw(state_sets(chain.states))
    k = data.draw(st.integers(0, 5))
    res = time_bounded_reach(ExactEstimator(chain), mu, B, f"[0,{k}]", eps=1e-12)
    want = bounded_event_probability(chain, mu, eventually(B, "<=", k), k)
    assert res.lo == want == res.hi


def test_hoeffding_halfwidth():
    assert hoeffding(10_000, 0.01) == pytest.approx(math.sqrt(math.log(200) / 20_000))


def test_monte_carlo_seeded_reproducibility():
    est = MonteCarloEstimator(ChainSimulator(two_sinks_chain()), samples=5000, seed=7, workers=3)
    a = approx_reach(est, d("c"), {"a"}, eps=0.1)
    b = approx_reach(est, d("c"), {"a"}, eps=0.1)
    assert (a.lo, a.hi) == (b.lo, b.hi)
    c = approx_reach(MonteCarloEstimator(ChainSimulator(two_sinks_chain()), samples=5000, seed=7,
                                         workers=3, threads=3), d("c"), {"a"}, eps=0.1)
    assert (a.lo, a.hi) == (c.lo, c.hi)


def test_monte_carlo_calibration():
    """Over 200 seeds the 95% interval covers 1/2 in at least 93% of runs."""
    chain = two_sinks_chain()
    covered = 0
    for seed in range(200):
        est = MonteCarloEstimator(ChainSimulator(chain), samples=400, confidence=0.95, seed=seed)
        res = approx_reach(est, d("c"), {"a"}, eps=0.5)
        covered += res.contains(0.5)
    assert covered / 200 >= 0.93


# ---- properties -----------------------------------------------------------

@given(st.data())
def test_adjacent_sequences_bracket_the_oracle(data):
    chain = data.draw(finite_chains())
    mu = data.draw(distributions(chain.states))
    B = data.draw(state_sets(chain.states))
    res = approx_reach(ExactEstimator(chain), mu, B, eps=1e-6, keep_history=True)
    x = exact_reachability_finite(chain, B)
    value = sum(p * x[s] for s, p in mu.items())
    for (lo, hi), (lo2, hi2) in zip(res.history, res.history[1:]):
        assert lo <= lo2 and hi2 <= hi
    assert all(lo <= value <= hi for lo, hi in res.history)


@given(st.data())
def test_repeated_brackets_the_oracle(data):
    chain = data.draw(finite_chains())
    mu = data.draw(distributions(chain.states))
    B = data.draw(state_sets(chain.states))
    res = approx_repeated(ExactEstimator(chain), mu, B, eps=1e-6, keep_history=True)
    value = repeated_oracle(chain, mu, B)
    assert all(lo <= value <= hi for lo, hi in res.history)
    assert res.status is Status.CONVERGED


@given(st.data(), st.integers(1, 8))
def test_more_budget_never_widens(data, budget):
    chain = data.draw(finite_chains(max_states=10))
    mu = data.draw(distributions(chain.states))
    B = data.draw(state_sets(chain.states))
    a = approx_reach(ExactEstimator(chain), mu, B, eps=1e-9, budget=budget)
    b = approx_reach(ExactEstimator(chain), mu, B, eps=1e-9, budget=2 * budget)
    assert b.gap <= a.gap


@given(st.data())
def test_omega_attractor_matches_exact_muller(data):
    chain = data.draw(finite_chains(max_states=10))
    dma = data.draw(muller_automata())
    mu = data.draw(distributions(chain.states))
    res = quant_omega_attractor(chain, mu, dma, eps=1e-6)
    exact = muller_probability_exact(product(chain, dma), lift_initial(mu, dma))
    assert res.status is Status.CONVERGED and res.contains(exact)


@given(st.data())
def test_float_mode_close_to_exact(data):
    chain = data.draw(finite_chains(max_states=10))
    mu = data.draw(distributions(chain.states))
    B = data.draw(state_sets(chain.states))
    a = approx_reach(ExactEstimator(chain), mu, B, eps=1e-8)
    b = approx_reach(ExactEstimator(chain, exact=False), mu, B, eps=1e-8)
    assert abs(float(a.lo) - b.lo) < 1e-9 and abs(float(a.hi) - b.hi) < 1e-9
