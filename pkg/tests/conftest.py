import sys
from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from decisive.core import FiniteChain, SparseDistribution
from decisive.omega import MullerAutomaton, letters

settings.register_profile("default", deadline=None, max_examples=100,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("lemmas", deadline=None, max_examples=1000,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

LEMMA_SETTINGS = settings.get_profile("lemmas")


@st.composite
def rational_rows(draw, n: int, max_out: int = 4):
    rows = {}
    for s in range(n):
        k = draw(st.integers(1, min(max_out, n)))
        succ = draw(st.lists(st.integers(0, n - 1), min_size=k, max_size=k, unique=True))
        w = draw(st.lists(st.integers(1, 6), min_size=k, max_size=k))
        tot = sum(w)
        rows[s] = {t: Fraction(x, tot) for t, x in zip(succ, w)}
    return rows


@st.composite
def finite_chains(draw, max_states: int = 20, ap=("a", "b")):
    n = draw(st.integers(1, max_states))
    rows = draw(rational_rows(n))
    labels = {s: draw(st.sets(st.sampled_from(ap))) for s in range(n)}
    return FiniteChain(rows, labels=labels, ap=ap)


@st.composite
def distributions(draw, states):
    states = list(states)
    k = draw(st.integers(1, min(3, len(states))))
    support = draw(st.lists(st.sampled_from(states), min_size=k, max_size=k, unique=True))
    w = draw(st.lists(st.integers(1, 5), min_size=k, max_size=k))
    return SparseDistribution({s: Fraction(x, sum(w)) for s, x in zip(support, w)})


@st.composite
def state_sets(draw, states):
    return frozenset(draw(st.sets(st.sampled_from(list(states)))))


@st.composite
def muller_automata(draw, ap=("a", "b"), max_locations: int = 3):
    m = draw(st.integers(1, max_locations))
    locs = [f"q{i}" for i in range(m)]
    edges = [(q, u, draw(st.sampled_from(locs))) for q in locs for u in letters(ap)]
    subsets = [frozenset(l for i, l in enumerate(locs) if mask >> i & 1)
               for mask in range(1, 2 ** m)]
    family = draw(st.sets(st.sampled_from(subsets)))
    return MullerAutomaton(locs, "q0", edges, family, ap)


@pytest.fixture
def third():
    return Fraction(1, 3)


LAW_OUTCOMES: dict = {}


def pytest_runtest_logreport(report):
    if "test_lemmas.py" in report.nodeid and (report.when == "call" or report.failed):
        LAW_OUTCOMES[report.nodeid.split("::")[-1]] = report.outcome


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    if 7 in mod.RESULTS:
        ran = sorted(LAW_OUTCOMES)
        ok = len(ran) == 7 and all(v == "passed" for v in LAW_OUTCOMES.values())
        detail = (f"{sum(v == 'passed' for v in LAW_OUTCOMES.values())}/7 passed"
                  if ran else "run tests/test_lemmas.py in the same session")
        mod.record(7, "laws pass in this session", ok, detail)
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
