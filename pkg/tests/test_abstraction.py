from fractions import Fraction as F

import pytest
from hypothesis import given
from hypothesis import strategies as st

from decisive.abstraction import (AbstractionHandle, Soundness, certify_complete,
                                  certify_sound_via_decisiveness, check_abstraction, default_catalogue,
                                  identity_alpha, lift_alpha_to_product, lift_handle,
                                  override_soundness, pushforward, soundness_witness_search,
                                  table_alpha, transfer_attractor)
from decisive.core import FiniteChain, LazyChain, SparseDistribution, StateSet, cylinder_probability
from decisive.errors import EvidenceError, Refusal
from decisive.estimators import ChainSimulator, MonteCarloEstimator
from decisive.evidence import Evidence
from decisive.models import (always_a_dma, random_walk, tf_chain, two_sinks_chain, walk_escape,
                             walk_evidence, walk_tf_handle, walk_to_tf, walk_to_tf_alpha)
from decisive.omega import product
from decisive.qualitative import avoid_set, is_attractor

from conftest import distributions, finite_chains, state_sets

d = SparseDistribution.dirac


def three_state_mismatch():
    """0 -> 1 -> 2 -> 2 lumped as {0,1} -> A, {2} -> B; A's abstract loop has no
    counterpart at 1, and A -> B has none at 0."""
    conc = FiniteChain({0: {1: 1}, 1: {2: 1}, 2: {2: 1}})
    half = F(1, 2)
    abst = FiniteChain({"A": {"A": half, "B": half}, "B": {"B": 1}})
    return AbstractionHandle(conc, abst, table_alpha({0: "A", 1: "A", 2: "B"}))


def quotient_handle(chain, table):
    """The lumped chain of ``chain`` under ``table``, when the lumping is exact."""
    rows = {}
    for s in chain.states:
        a = table[s]
        row = {}
        for t, p in chain.successors(s).items():
            row[table[t]] = row.get(table[t], 0) + p
        rows.setdefault(a, row)
    return AbstractionHandle(chain, FiniteChain(rows), table_alpha(table))


def test_pushforward_examples():
    alpha = walk_to_tf_alpha()
    assert dict(pushforward(alpha, d(0))) == {"s0": 1}
    u = SparseDistribution.uniform([0, 1, 2, 3])
    assert dict(pushforward(alpha, u)) == {"s0": F(1, 4), "s1": F(1, 4), "s2": F(1, 2)}
    mu = SparseDistribution({0: F(1, 3), 5: F(2, 3)})
    assert dict(pushforward(identity_alpha(), mu)) == dict(mu)


def test_walk_to_tf_fails_the_one_step_condition():
    """From 3 the walk only moves to 2 and 4, both in the fiber of s2, while
    the abstract chain moves from s2 to s1 as well."""
    h = walk_tf_handle(F(1, 3))
    res = check_abstraction(h, bound=10)
    assert not res and h.is_abstraction is False
    assert res.bounded
    assert (3, "s1", "abstract edge without concrete counterpart") in res.offending
    assert all(s >= 3 for s, _, _ in res.offending)
    # the only witness of the abstract edge s2 -> s1 is state 2
    assert "s1" in {walk_to_tf(t) for t in random_walk(F(1, 3)).successors(2)}
    # the path measures differ already on a two-step cylinder
    conc = cylinder_probability(random_walk(F(1, 3)), d(3), [{3}, {1}])
    abst = cylinder_probability(tf_chain(), d("s2"), [{"s2"}, {"s1"}])
    assert conc == 0 < abst


def test_identity_is_an_abstraction():
    c = tf_chain()
    h = AbstractionHandle(c, c, identity_alpha(c.states))
    assert check_abstraction(h)


def test_constructed_mismatch_is_reported():
    h = three_state_mismatch()
    res = check_abstraction(h)
    assert not res
    assert (0, "B", "abstract edge without concrete counterpart") in res.offending
    assert (1, "A", "abstract edge without concrete counterpart") in res.offending
    assert res.to_dict()["offending"]


def test_completeness():
    c = tf_chain()
    h = AbstractionHandle(c, c, identity_alpha(c.states))
    check_abstraction(h)
    assert certify_complete(h)
    w = walk_tf_handle()
    check_abstraction(w, bound=10)
    assert not certify_complete(w)
    assert "not certified" in w.notes[-1]
    lazy = LazyChain(lambda n: {n + 1: 1}, is_state=lambda n: isinstance(n, int) and n >= 0)
    h2 = AbstractionHandle(lazy, lazy, identity_alpha())
    h2.is_abstraction = True
    assert not certify_complete(h2)


def test_soundness_for_finite_concrete():
    c = two_sinks_chain()
    h = AbstractionHandle(c, c, identity_alpha(c.states))
    check_abstraction(h)
    assert certify_sound_via_decisiveness(h, Evidence.finite_chain())
    assert h.soundness is Soundness.CERTIFIED


def test_soundness_refusals():
    w = walk_tf_handle(F(1, 3))
    with pytest.raises(Refusal):
        certify_sound_via_decisiveness(w, Evidence.assumed("recurrent"))
    check_abstraction(w, bound=10)
    with pytest.raises(Refusal):
        certify_sound_via_decisiveness(w, walk_evidence(w, F(1, 3)))
    c = two_sinks_chain()
    h = AbstractionHandle(c, c, identity_alpha(c.states))
    check_abstraction(h)
    with pytest.raises(EvidenceError):
        certify_sound_via_decisiveness(h, Evidence.assumed("trust me"))


def test_walk_fiber_bounds_only_below_half():
    with pytest.raises(EvidenceError):
        walk_evidence(walk_tf_handle(F(2, 3)), F(2, 3))
    ev = walk_evidence(walk_tf_handle(F(1, 3)), F(1, 3))
    assert ev.bounds and ev.declared


def test_witness_search_transient_walk():
    h = walk_tf_handle(F(2, 3))
    est = MonteCarloEstimator(ChainSimulator(h.concrete), samples=1000, seed=3)
    ce = soundness_witness_search(h, d(1), estimator=est, max_samples=10_000,
                                  escape=walk_escape(F(2, 3), K=24, target_max=1))
    assert ce is not None and ce.abstract_value == 1 and ce.upper < 1
    assert ce.target == {"s0"} or ce.target == {"s0", "s1"} or ce.upper < 0.7
    assert h.soundness is Soundness.UNSOUND


def test_witness_search_recurrent_walk_finds_nothing():
    h = walk_tf_handle(F(1, 3))
    est = MonteCarloEstimator(ChainSimulator(h.concrete), samples=1000, seed=3)
    assert soundness_witness_search(h, d(1), estimator=est, max_samples=10_000, horizon=2000) is None
    assert h.soundness is Soundness.UNKNOWN


def test_witness_search_identity_finds_nothing():
    c = two_sinks_chain()
    h = AbstractionHandle(c, c, identity_alpha(c.states))
    assert soundness_witness_search(h, d("c")) is None


def test_witness_search_exact_on_coarse_lumping():
    """Both sinks lumped into one absorbing state; surely reaching it holds concretely too."""
    c = two_sinks_chain()
    abst = FiniteChain({"x": {"x": 1}, "c": {"x": 1}})
    h = AbstractionHandle(c, abst, table_alpha({"a": "x", "b": "x", "c": "c"}))
    assert soundness_witness_search(h, d("c")) is None
    assert default_catalogue(abst) == [frozenset({"c"}), frozenset({"x"})]


def test_product_counterexample_fixture():
    """Lifted walk (p=2/3) and its three-state abstraction with the q0/q1/q2 automaton:
    from (0, q0) the abstract product surely reaches (s0, q2), the walk does not."""
    dma = always_a_dma()
    base = AbstractionHandle(random_walk(F(2, 3)), tf_chain(F(2, 3)), walk_to_tf_alpha())
    h = lift_handle(base, dma)
    assert h.alpha((7, "q1")) == ("s2", "q1")
    est = MonteCarloEstimator(ChainSimulator(h.concrete), samples=1000, seed=11)
    ce = soundness_witness_search(h, d((0, "q0")), estimator=est, catalogue=[{("s0", "q2")}],
                                  max_samples=10_000,
                                  escape=walk_escape(F(2, 3), K=24, target_max=1, pairs=True))
    assert ce is not None and ce.upper < 0.7


def test_lift_to_product():
    dma = always_a_dma()
    ident = lift_alpha_to_product(identity_alpha(), dma)
    assert ident((3, "q2")) == (3, "q2")
    lifted = lift_alpha_to_product(walk_to_tf_alpha(), dma)
    assert lifted((0, "q0")) == ("s0", "q0") and lifted((9, "q1")) == ("s2", "q1")
    c = tf_chain()
    h = lift_handle(AbstractionHandle(c, c, identity_alpha(c.states)), dma)
    assert check_abstraction(h)


def test_lifted_walk_handle_inherits_the_mismatch():
    h = lift_handle(walk_tf_handle(F(1, 3)), always_a_dma())
    res = check_abstraction(h, bound=6, roots=[(0, "q0")])
    assert not res
    assert all(s[0] >= 3 for s, _, _ in res.offending)


def test_transfer_attractor():
    c = two_sinks_chain()
    h = AbstractionHandle(c, c, identity_alpha(c.states))
    with pytest.raises(Refusal):
        transfer_attractor(h, {"a", "b"})
    check_abstraction(h)
    certify_sound_via_decisiveness(h, Evidence.finite_chain())
    A = transfer_attractor(h, {"a", "b"})
    assert set(c.states) & {s for s in c.states if s in A} == {"a", "b"}
    assert is_attractor(c, StateSet.explicit(["a", "b"]))
    allA = transfer_attractor(h, set(c.states))
    assert all(s in allA for s in c.states)
    with pytest.raises(Refusal):
        transfer_attractor(h, {"a"})


def test_override_taints():
    h = walk_tf_handle(F(1, 3))
    override_soundness(h, "recurrent walk")
    assert h.evidence.tainted and h.soundness is Soundness.UNKNOWN


# ---- properties on exact lumpings ------------------------------------------

@st.composite
def lumpable(draw):
    """A chain built as a lumpable refinement of a random abstract chain."""
    abst = draw(finite_chains(max_states=5, ap=("a",)))
    table, rows, labels = {}, {}, {}
    copies = {a: draw(st.integers(1, 3)) for a in abst.states}
    for a in abst.states:
        for i in range(copies[a]):
            table[(a, i)] = a
            labels[(a, i)] = abst.label(a)
    for a in abst.states:
        for i in range(copies[a]):
            row = {}
            for b, p in abst.successors(a).items():
                k = draw(st.integers(1, copies[b]))
                ws = draw(st.lists(st.integers(1, 4), min_size=k, max_size=k))
                for j, w in enumerate(ws):
                    row[(b, j)] = row.get((b, j), 0) + p * F(w, sum(ws))
            rows[(a, i)] = row
    conc = FiniteChain(rows, labels=labels, ap=("a",))
    return AbstractionHandle(conc, abst, table_alpha(table))


@given(lumpable())
def test_lumpings_pass_the_check(h):
    assert check_abstraction(h)


@given(st.data())
def test_avoid_sets_commute_with_preimage(data):
    h = data.draw(lumpable())
    B = data.draw(state_sets(h.abstract.states))
    conc_B = {s for s in h.concrete.states if h.alpha(s) in B}
    left = avoid_set(h.concrete, conc_B).members
    right = {s for s in h.concrete.states if h.alpha(s) in avoid_set(h.abstract, B)}
    assert left == right


@given(st.data())
def test_cylinder_signs_transfer(data):
    h = data.draw(lumpable())
    mu = data.draw(distributions(h.concrete.states))
    n = data.draw(st.integers(1, 4))
    sets = [data.draw(state_sets(h.abstract.states)) for _ in range(n)]
    pre = [{s for s in h.concrete.states if h.alpha(s) in A} for A in sets]
    conc = cylinder_probability(h.concrete, mu, pre)
    abst = cylinder_probability(h.abstract, pushforward(h.alpha, mu), sets)
    assert (conc > 0) == (abst > 0)


@given(st.data())
def test_dirac_pushforward(data):
    chain = data.draw(finite_chains())
    s = data.draw(st.sampled_from(chain.states))
    k = data.draw(st.integers(1, 4))
    alpha = table_alpha({t: t % k for t in chain.states})
    assert dict(pushforward(alpha, d(s))) == {s % k: 1}
    mu = data.draw(distributions(chain.states))
    assert sum(pushforward(alpha, mu).values()) == 1
