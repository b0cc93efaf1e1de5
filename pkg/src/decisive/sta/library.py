"""Ready-made STA instances together with their known quantities."""

from __future__ import annotations

import math

import numpy as np

from ..estimators import EscapeBound
from .model import StaModel, make_sta
from .sampler import BatchPredicate, _config


def pacman_sta(nu=0.5) -> StaModel:
    """Two clocks, two loops through l0; the ``l1``/``l2`` loop gets rarer each round."""
    edges = [
        ("l0", "y<1", [], "l1"),
        ("l1", "y=1", ["y"], "l2"),
        ("l2", "x>1 && y<1", ["x"], "l0"),
        ("l0", "1<y<2", [], "l3"),
        ("l3", "y=2", ["y"], "l4"),
        ("l4", "x>2 && y<1", ["x"], "l0"),
    ]
    dists = {"l0": "uniform", "l1": "dirac", "l2": "uniform", "l3": "dirac", "l4": "uniform"}
    labels = {"l2": {"goal"}}
    return make_sta(["x", "y"], ["l0", "l1", "l2", "l3", "l4"], edges, dists,
                    ("l0", (0, nu)), labels, name="pacman")


def pacman_reach_probability(nu: float) -> float:
    """Probability of ever reaching ``l2`` from ``(l0, x=0, y=nu)``.

    With ``w = 1 - nu`` the left branch is taken with probability
    ``w / (1 + w)`` and either way the next ``w`` is uniform on ``(0, w)``,
    so ``g(w) = w/(1+w) + (1/(1+w)) (1/w) int_0^w g``, solved by
    ``g(w) = 1 - 1/(1+w)^2``.
    """
    return 1.0 - 1.0 / (2.0 - nu) ** 2


def pacman_reach_by_iteration(nu: float, grid: int = 4000, tol: float = 1e-12) -> float:
    """Same quantity by fixed-point iteration of the integral equation on a grid."""
    w = np.linspace(0.0, 1.0, grid + 1)
    g = np.zeros_like(w)
    dw = w[1] - w[0]
    for _ in range(10_000):
        integral = np.concatenate([[0.0], np.cumsum((g[1:] + g[:-1]) / 2 * dw)])
        mean = np.divide(integral, w, out=np.zeros_like(w), where=w > 0)
        new = (w + mean) / (1.0 + w)
        if np.max(np.abs(new - g)) < tol:
            g = new
            break
        g = new
    return float(np.interp(1.0 - nu, w, g))


def pacman_escape(sta: StaModel, eta: float = 1e-3) -> EscapeBound:
    """Back in ``l0`` with ``y > 1 - eta``: ``l2`` is then reached with probability below ``2 eta``."""
    l0 = sta.loc_index["l0"]
    xi, yi = sta.clock_index["x"], sta.clock_index["y"]

    def test(s):
        loc, val = _config(s)
        return loc == "l0" and val[xi] == 0 and val[yi] > 1 - eta

    def batch_test(sim, b):
        return (b["loc"] == l0) & (b["val"][:, xi] == 0) & (b["val"][:, yi] > 1 - eta)

    region = BatchPredicate(test, batch_test, name=f"l0, x=0, y>1-{eta}")
    return EscapeBound(region, 2 * eta, "from y=1-w the left loop is ever taken with probability <= 2w")


def exponential_self_loop(rate: float = 1.0) -> StaModel:
    """One location that jumps back to itself after an exponential delay."""
    return make_sta(["x"], ["s"], [("s", "true", ["x"], "s")], {"s": ("exponential", rate)},
                    ("s", (0,)), {"s": {"tick"}}, name=f"exp-loop(rate={rate})")


def jump_probability(rate: float, T: float) -> float:
    return 1.0 - math.exp(-rate * T)


def reactive_cycle(rate_a: float = 1.0, rate_b: float = 2.0) -> StaModel:
    """Two locations alternating forever; ``a`` is visited infinitely often."""
    edges = [("p", "x<1", ["x"], "q"), ("p", "x>=1", ["x"], "q"), ("q", "true", [], "p")]
    return make_sta(["x"], ["p", "q"], edges, {"p": ("exponential", rate_a),
                                                "q": ("exponential", rate_b)},
                    ("p", (0,)), {"p": {"a"}}, name="reactive-cycle")


def reactive_two_clocks() -> StaModel:
    """Reactive with two clocks: a fast location and a reset loop."""
    edges = [("p", "x<1", ["y"], "q"), ("p", "x>=1", ["x"], "p"),
             ("q", "y<2", ["x"], "p"), ("q", "y>=2", [], "q")]
    return make_sta(["x", "y"], ["p", "q"], edges, {"p": ("exponential", 1.0),
                                                     "q": ("exponential", 0.5)},
                    ("p", (0, 0)), {"q": {"a"}}, name="reactive-two-clocks")


def oneclock_race() -> StaModel:
    """Uniform delay on (0, 2); before 1 both sinks are possible, after 1 only ``b``.

    ``P(reach a) = 1/2 * 1/2 = 1/4``.
    """
    edges = [("start", "x<1", ["x"], "a"), ("start", "x<2", ["x"], "b"),
             ("a", "x<1", ["x"], "a"), ("b", "x<1", ["x"], "b")]
    return make_sta(["x"], ["start", "a", "b"], edges,
                    {"start": "uniform", "a": "uniform", "b": "uniform"},
                    ("start", (0,)), {"a": {"a"}}, name="one-clock-race")


def oneclock_stuck() -> StaModel:
    """One clock, a terminal location that never resets and ends above the maximal constant."""
    edges = [("start", "x<1", [], "wait"), ("wait", "x>1", [], "done"),
             ("done", "true", [], "done")]
    return make_sta(["x"], ["start", "wait", "done"], edges,
                    {"start": "uniform", "wait": ("exponential", 1.0),
                     "done": ("exponential", 1.0)},
                    ("start", (0,)), {"done": {"a"}}, name="one-clock-stuck")


STA_LIBRARY = {
    "pacman": pacman_sta,
    "exp-loop": exponential_self_loop,
    "reactive-cycle": reactive_cycle,
    "reactive-two-clocks": reactive_two_clocks,
    "one-clock-race": oneclock_race,
    "one-clock-stuck": oneclock_stuck,
}
