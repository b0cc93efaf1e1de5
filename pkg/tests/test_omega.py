import itertools
from fractions import Fraction as F

import pytest
from hypothesis import given
from hypothesis import strategies as st

from decisive.core import FiniteChain, SparseDistribution, cylinder_probability, exact_reachability_finite
from decisive.errors import AlphabetMismatch, IncompleteAutomaton, NondeterministicAutomaton
from decisive.models import always_a_dma, random_walk, tf_chain, truncated_walk
from decisive.omega import MullerAutomaton, letters, lift_initial, muller_probability_exact, product
from decisive.qualitative import is_attractor

from conftest import distributions, finite_chains, muller_automata, state_sets


def test_walk_times_always_a_automaton():
    prod = product(random_walk(F(1, 3)), always_a_dma())
    assert dict(prod.successors((0, "q0"))) == {(1, "q1"): 1}
    assert dict(prod.successors((1, "q1"))) == {(2, "q2"): F(1, 3), (0, "q2"): F(2, 3)}
    assert dict(prod.successors((0, "q2"))) == {(1, "q1"): 1}
    assert prod.label((5, "q1")) == {"q1"}


def test_single_state_product():
    c = FiniteChain({"s": {"s": 1}}, labels={"s": set()}, ap=())
    dma = MullerAutomaton(["q"], "q", [("q", frozenset(), "q")], [{"q"}], ap=())
    prod = product(c, dma)
    assert list(prod.states) == [("s", "q")]
    assert dict(prod.successors(("s", "q"))) == {("s", "q"): 1}


def test_alphabet_mismatch():
    c = FiniteChain({"s": {"s": 1}}, labels={"s": {"b"}}, ap=("b",))
    with pytest.raises(AlphabetMismatch):
        product(c, always_a_dma())


def test_automaton_checks():
    a = frozenset({"a"})
    with pytest.raises(NondeterministicAutomaton):
        MullerAutomaton(["q0", "q1"], "q0", [("q0", a, "q0"), ("q0", a, "q1")], [], ap={"a"})
    with pytest.raises(IncompleteAutomaton):
        always_a_dma(complete=False)
    dma = always_a_dma()
    assert dma.step("q0", set()) == "_sink"
    assert dma.step("_sink", {"a"}) == "_sink"


def test_lift_initial():
    dma = always_a_dma()
    assert dict(lift_initial(SparseDistribution.dirac(0), dma)) == {(0, "q0"): 1}
    u = lift_initial(SparseDistribution({0: F(1, 2), 1: F(1, 2)}), dma)
    assert dict(u) == {(0, "q0"): F(1, 2), (1, "q0"): F(1, 2)}
    assert u.prob((0, "q1")) == 0


def test_muller_probability_on_truncated_walk():
    dma = always_a_dma()
    prod = product(truncated_walk(F(1, 3), 50), dma)
    mu = SparseDistribution.dirac((0, "q0"))
    assert muller_probability_exact(prod, mu) == 1
    assert muller_probability_exact(product(truncated_walk(F(1, 3), 50), dma.with_muller([])), mu) == 0
    every = [set(c) for r in range(1, 5) for c in itertools.combinations(dma.locations, r)]
    assert muller_probability_exact(product(truncated_walk(F(1, 3), 50), dma.with_muller(every)), mu) == 1


def test_muller_probability_two_outcomes():
    half = F(1, 2)
    c = FiniteChain({"c": {"x": half, "y": half}, "x": {"x": 1}, "y": {"y": 1}},
                    labels={"x": {"a"}}, ap={"a"})
    q = ["seen", "unseen"]
    edges = [(p, u, "seen" if "a" in u else "unseen") for p in q for u in letters({"a"})]
    dma = MullerAutomaton(q, "unseen", edges, [{"seen"}], ap={"a"})
    assert muller_probability_exact(product(c, dma), lift_initial(SparseDistribution.dirac("c"), dma)) == half


@given(st.data())
def test_out_degree_preserved(data):
    chain = data.draw(finite_chains(max_states=10))
    dma = data.draw(muller_automata())
    prod = product(chain, dma)
    for s, q in prod.states:
        succ = prod.successors((s, q))
        assert len(succ) == len(chain.successors(s))
        assert len({q2 for _, q2 in succ}) == 1


def _brute_product_cylinder(chain, dma, mu, sets):
    """Sum over factor paths whose automaton run stays inside the pair sets."""
    total = F(0)
    n = len(sets)
    for s0, p0 in mu.items():
        stack = [((s0,), p0)]
        while stack:
            path, p = stack.pop()
            if len(path) == n:
                q = dma.initial
                ok = True
                for i, s in enumerate(path):
                    if (s, q) not in sets[i]:
                        ok = False
                        break
                    q = dma.step(q, chain.label(s))
                if ok:
                    total += p
                continue
            for t, w in chain.successors(path[-1]).items():
                stack.append((path + (t,), p * w))
    return total


@given(st.data())
def test_product_cylinders_match_factor_paths(data):
    chain = data.draw(finite_chains(max_states=5))
    dma = data.draw(muller_automata())
    mu = data.draw(distributions(chain.states))
    prod = product(chain, dma)
    n = data.draw(st.integers(1, 4))
    sets = [data.draw(state_sets(prod.states)) for _ in range(n)]
    got = cylinder_probability(prod, lift_initial(mu, dma), sets)
    assert got == _brute_product_cylinder(chain, dma, mu, sets)


@given(st.data())
def test_product_keeps_attractors(data):
    chain = data.draw(finite_chains(max_states=10))
    dma = data.draw(muller_automata())
    A = data.draw(state_sets(chain.states))
    if not A or not is_attractor(chain, A):
        return
    prod = product(chain, dma)
    assert is_attractor(prod, {(s, q) for s in A for q in dma.locations})


def test_tf_product_reachability_is_total():
    prod = product(tf_chain(), always_a_dma())
    x = exact_reachability_finite(prod, {("s0", "q1"), ("s0", "q2")})
    assert x[("s1", "q0")] == 1
