"""Batch simulation of STA runs, optionally in product with an automaton.

A batch keeps locations, clock valuations, elapsed time and jump counts in
numpy arrays, so one call to ``advance`` moves every run by one jump.  The
delay of each run is drawn from its location's distribution restricted to
the delays that enable some edge: the enabling set is cut into elementary
pieces, a piece is drawn by its mass and a delay inside it by inverse CDF.
"""

from __future__ import annotations

import numpy as np

from ..abstraction import PreimageSet
from ..core import SparseDistribution, StateSet, as_distribution
from ..errors import DeadlockedConfiguration, InvalidModel
from ..evidence import Evidence
from ..omega import MullerAutomaton, lift_initial
from . import regions as R
from .model import StaModel
from .thickgraph import ProductRegionMap, RegionMap

SNAP = 1e-9


class BatchPredicate(StateSet):
    """A state set that can also be tested on a whole batch at once."""

    __slots__ = ("batch_test",)

    def __init__(self, test, batch_test, name=None):
        super().__init__(test=test, name=name)
        self.batch_test = batch_test


def _config(s):
    """The STA configuration inside a plain or product state."""
    return s[0] if isinstance(s[0], tuple) else s


def location_set(sta: StaModel, locations, name=None) -> BatchPredicate:
    locs = frozenset(locations)
    for l in locs:
        if l not in sta.loc_index:
            raise InvalidModel(f"unknown location {l!r}")
    idx = np.array(sorted(sta.loc_index[l] for l in locs), dtype=np.int64)
    return BatchPredicate(lambda s: _config(s)[0] in locs,
                          lambda sim, b: np.isin(b["loc"], idx),
                          name=name or "{" + ",".join(sorted(locs)) + "}")


def min_jumps(k: int, within: BatchPredicate | None = None) -> BatchPredicate:
    """Runs that have taken at least ``k`` jumps, optionally inside ``within`` (batch-level only)."""

    def test(_s):
        raise TypeError("jump counts are only tracked on simulated batches")

    if within is None:
        return BatchPredicate(test, lambda sim, b: b["jumps"] >= k, name=f"jumps>={k}")
    return BatchPredicate(test, lambda sim, b: (b["jumps"] >= k) & within.batch_test(sim, b),
                          name=f"{within.name} && jumps>={k}")


class StaSimulator:
    """Simulator interface used by ``MonteCarloEstimator``."""

    chain = None

    def __init__(self, sta: StaModel, dma: MullerAutomaton | None = None,
                 non_zeno: Evidence | None = None):
        self.sta = sta
        self.dma = dma
        self.non_zeno = non_zeno
        self.k = len(sta.clocks)
        self.M = sta.max_const
        self.nloc = len(sta.locations)
        self._codes: dict = {}
        self._edges = {}
        for l in sta.locations:
            rows = []
            for e in sta.out_edges[l]:
                lower, upper = [], []
                for c in e.guard:
                    i = sta.clock_index[c.clock]
                    if c.op in (">", ">=", "="):
                        lower.append((i, c.const, c.op != ">"))
                    if c.op in ("<", "<=", "="):
                        upper.append((i, c.const, c.op != "<"))
                reset = np.array([sta.clock_index[x] for x in sorted(e.resets)], dtype=np.int64)
                rows.append((lower, upper, reset, sta.loc_index[e.target], float(e.weight)))
            self._edges[sta.loc_index[l]] = rows
        if dma is not None:
            self.qs = list(dma.locations)
            self.q_index = {q: i for i, q in enumerate(self.qs)}
            self.trans = np.array([[self.q_index[dma.step(q, sta.labels[l])]
                                    for l in sta.locations] for q in self.qs], dtype=np.int64)

    def for_product(self, dma: MullerAutomaton) -> StaSimulator:
        return StaSimulator(self.sta, dma, self.non_zeno)

    def lift(self, mu, dma):
        return lift_initial(mu, dma)

    def time_evidence(self) -> Evidence:
        if self.non_zeno is None:
            return Evidence.assumed("non-Zeno behaviour not established for this STA")
        return self.non_zeno

    # batch interface

    def start(self, mu, size: int, rng: np.random.Generator) -> dict:
        mu = as_distribution(mu)
        atoms = list(mu)
        cum = np.cumsum([float(w) for w in mu.values()])
        cum /= cum[-1]
        pick = np.minimum(np.searchsorted(cum, rng.random(size), side="right"), len(atoms) - 1)
        loc = np.empty(len(atoms), dtype=np.int64)
        val = np.empty((len(atoms), self.k))
        q = np.zeros(len(atoms), dtype=np.int64)
        for i, s in enumerate(atoms):
            if self.dma is not None:
                s, qs = s
                q[i] = self.q_index[qs]
            l, v = s
            loc[i] = self.sta.loc_index[l]
            val[i] = [float(x) for x in v]
        return {"loc": loc[pick], "val": val[pick], "t": np.zeros(size),
                "jumps": np.zeros(size, dtype=np.int64), "q": q[pick]}

    def size(self, batch) -> int:
        return len(batch["loc"])

    def take(self, batch, mask) -> dict:
        return {k: v[mask] for k, v in batch.items()}

    def times(self, batch) -> np.ndarray:
        return batch["t"]

    def states(self, batch) -> list:
        out = []
        for i in range(self.size(batch)):
            c = (self.sta.locations[batch["loc"][i]], tuple(float(x) for x in batch["val"][i]))
            out.append((c, self.qs[batch["q"][i]]) if self.dma is not None else c)
        return out

    def _keys(self, batch, with_q: bool) -> np.ndarray:
        codes = R.region_codes(batch["val"], self.M)
        key = codes * self.nloc + batch["loc"]
        if with_q:
            key = key * len(self.qs) + batch["q"]
        return key

    def _image_keys(self, A: PreimageSet, with_q: bool) -> np.ndarray:
        hit = self._codes.get(id(A))
        if hit is not None and hit[0] is A:
            return hit[1]
        keys = []
        for a in A.image.members:
            if with_q:
                (l, r), qs = a
            else:
                l, r = a
            if l not in self.sta.loc_index or (with_q and qs not in self.q_index):
                continue
            key = r.code(self.M) * self.nloc + self.sta.loc_index[l]
            if with_q:
                key = key * len(self.qs) + self.q_index[qs]
            keys.append(key)
        arr = np.array(sorted(keys), dtype=np.int64)
        self._codes[id(A)] = (A, arr)
        return arr

    def member(self, batch, A) -> np.ndarray:
        m = self.size(batch)
        bt = getattr(A, "batch_test", None)
        if bt is not None:
            return np.asarray(bt(self, batch), dtype=bool)
        if isinstance(A, PreimageSet) and A.image.is_explicit:
            if isinstance(A.alpha, RegionMap) and self.dma is None:
                return np.isin(self._keys(batch, False), self._image_keys(A, False))
            if isinstance(A.alpha, ProductRegionMap) and self.dma is not None:
                return np.isin(self._keys(batch, True), self._image_keys(A, True))
        if A.is_explicit and not A.members:
            return np.zeros(m, dtype=bool)
        return np.fromiter((s in A for s in self.states(batch)), dtype=bool, count=m)

    def advance(self, batch, rng: np.random.Generator) -> dict:
        loc, val = batch["loc"], batch["val"]
        m = len(loc)
        new_loc = loc.copy()
        new_val = val.copy()
        delay = np.zeros(m)
        for l in np.unique(loc):
            rows = np.nonzero(loc == l)[0]
            d, tgt, resets = self._step_location(int(l), val[rows], rng)
            delay[rows] = d
            nv = val[rows] + d[:, None]
            snapped = np.round(nv)
            nv = np.where(np.abs(nv - snapped) < SNAP, snapped, nv)
            for j, reset in enumerate(resets):
                sel = tgt[1] == j
                if reset.size and sel.any():
                    sub = nv[sel]
                    sub[:, reset] = 0.0
                    nv[sel] = sub
            new_val[rows] = nv
            new_loc[rows] = tgt[0]
        q = batch["q"]
        if self.dma is not None:
            q = self.trans[q, loc]
        return {"loc": new_loc, "val": new_val, "t": batch["t"] + delay,
                "jumps": batch["jumps"] + 1, "q": q}

    def _step_location(self, l: int, v: np.ndarray, rng: np.random.Generator):
        edges = self._edges[l]
        name = self.sta.locations[l]
        m = len(v)
        E = len(edges)
        if E == 0:
            raise DeadlockedConfiguration(f"location {name!r} has no outgoing edge")
        lo = np.zeros((m, E))
        hi = np.full((m, E), np.inf)
        lo_c = np.ones((m, E), dtype=bool)
        hi_c = np.zeros((m, E), dtype=bool)
        for j, (lower, upper, _, _, _) in enumerate(edges):
            for i, c, closed in lower:
                b = c - v[:, i]
                upd = (b > lo[:, j]) | ((b == lo[:, j]) & (not closed))
                lo[:, j] = np.where(upd, b, lo[:, j])
                lo_c[:, j] = np.where(upd, closed, lo_c[:, j])
            for i, c, closed in upper:
                b = c - v[:, i]
                upd = (b < hi[:, j]) | ((b == hi[:, j]) & (not closed))
                hi[:, j] = np.where(upd, b, hi[:, j])
                hi_c[:, j] = np.where(upd, closed, hi_c[:, j])
        # elementary pieces between consecutive interval ends
        ends = np.concatenate([np.zeros((m, 1)), lo, np.where(np.isfinite(hi), hi, 0.0)], axis=1)
        ends = np.sort(np.clip(ends, 0.0, None), axis=1)
        a = ends
        b = np.concatenate([ends[:, 1:], np.full((m, 1), np.inf)], axis=1)
        finite_b = np.isfinite(b)
        mid = np.where(finite_b, (a + b) / 2, a + 1.0)
        length = b - a
        live = length > SNAP
        open_on = np.zeros(a.shape + (E,), dtype=bool)
        for j in range(E):
            open_on[:, :, j] = (mid > lo[:, [j]]) & (mid < hi[:, [j]])
        covered = live & open_on.any(axis=2)
        dist = self.sta.dists[name]
        if dist.kind == "exponential":
            lam = dist.rate
            mass = np.where(covered, np.exp(-lam * a) - np.where(finite_b, np.exp(-lam * b), 0.0), 0.0)
        else:
            if covered.any() and dist.kind == "dirac":
                raise InvalidModel(f"Dirac delay at {name!r} but the enabling delays have positive length")
            if dist.kind == "uniform" and (covered & ~finite_b).any():
                raise InvalidModel(f"uniform delay at {name!r} over an unbounded set of delays")
            mass = np.where(covered, length, 0.0)
        total = mass.sum(axis=1)
        wide = total > 0
        d = np.zeros(m)
        enabled = np.zeros((m, E), dtype=bool)
        if wide.any():
            w = mass[wide] / total[wide, None]
            cum = np.cumsum(w, axis=1)
            u = rng.random(int(wide.sum()))
            piece = np.minimum((cum < u[:, None]).sum(axis=1), w.shape[1] - 1)
            pa = a[wide, piece]
            pb = b[wide, piece]
            x = rng.random(len(pa))
            if dist.kind == "exponential":
                span = np.where(np.isfinite(pb), pb - pa, np.inf)
                d[wide] = pa - np.log1p(-x * -np.expm1(-lam * span)) / lam
            else:
                d[wide] = pa + x * (pb - pa)
            enabled[wide] = open_on[wide, piece, :]
        narrow = ~wide
        if narrow.any():
            pts = np.where((np.abs(hi - lo) <= SNAP) & lo_c & hi_c, lo, np.nan)[narrow]
            srt = np.sort(pts, axis=1)
            dup = np.zeros_like(srt, dtype=bool)
            dup[:, 1:] = np.abs(srt[:, 1:] - srt[:, :-1]) <= SNAP
            ok = ~np.isnan(srt) & ~dup
            count = ok.sum(axis=1)
            if (count == 0).any():
                raise DeadlockedConfiguration(f"no edge enabled from {name!r} at any delay")
            choice = np.floor(rng.random(len(count)) * count).astype(np.int64)
            rank = np.cumsum(ok, axis=1) - 1
            col = np.argmax(ok & (rank == choice[:, None]), axis=1)
            dp = srt[np.arange(len(col)), col]
            d[narrow] = dp
            enabled[narrow] = np.abs(pts - dp[:, None]) <= SNAP
        weights = np.array([e[4] for e in edges])
        ew = enabled * weights
        cum = np.cumsum(ew, axis=1)
        u = rng.random(m) * cum[:, -1]
        pick = np.minimum((cum <= u[:, None]).sum(axis=1), E - 1)
        targets = np.array([e[3] for e in edges], dtype=np.int64)[pick]
        resets = [e[2] for e in edges]
        return d, (targets, pick), resets


def sample_step(sta: StaModel, config, rng: np.random.Generator):
    """One jump from ``config``; returns the new configuration and the generator."""
    sim = StaSimulator(sta)
    batch = sim.start(SparseDistribution.dirac(config, exact=False), 1, rng)
    batch = sim.advance(batch, rng)
    return sim.states(batch)[0], rng


def sample_delay_and_step(sta: StaModel, config, rng: np.random.Generator):
    """Like ``sample_step`` but also returns the sampled delay."""
    sim = StaSimulator(sta)
    batch = sim.start(SparseDistribution.dirac(config, exact=False), 1, rng)
    batch = sim.advance(batch, rng)
    return sim.states(batch)[0], float(batch["t"][0]), rng

