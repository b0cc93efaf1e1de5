"""JSON formats for chains, automata, STA and abstraction handles.

Chain::

    {"states": [...], "init": {"s": "1/2", ...}, "edges": [{"from", "to", "prob"}],
     "labels": {"s": ["a"]}, "ap": ["a"]}

or a built-in family ``{"family": "random-walk", "p": "1/3"}``.

Automaton::

    {"locations": [...], "initial": "q0", "edges": [{"from", "label": [...], "to"}],
     "muller": [[...], ...], "ap": [...], "complete": false}

STA::

    {"clocks": ["x"], "locations": [{"name", "labels", "dist": {"kind", "rate"}}],
     "initial": {"location", "valuation"}, "edges": [{"from", "guard", "resets", "to", "weight"}]}

or ``{"builtin": "pacman"}``.

Handle::

    {"concrete": <chain or path>, "abstract": <chain or path>,
     "map": "walk-to-Tf" | "identity" | "sta-thick-graph" | {"table": {...}}}
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .abstraction import AbstractionHandle, identity_alpha, table_alpha
from .core import FiniteChain, MarkovChain, SparseDistribution, parse_prob, sorted_states
from .errors import InvalidModel, ParseError
from .models import BUILTIN_CHAINS, walk_to_tf_alpha
from .omega import SINK, MullerAutomaton
from .sta.library import STA_LIBRARY
from .sta.model import DelayDist, StaEdge, StaModel, parse_guard

_INT = re.compile(r"^-?\d+$")


def read_json(source) -> tuple[object, str]:
    """Parse a path or a JSON text; syntax errors report line and column."""
    if isinstance(source, (dict, list)):
        return source, "<inline>"
    text, name = source, "<text>"
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith(("{", "["))):
        name = str(source)
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise ParseError(f"cannot read file: {exc.strerror}", name) from None
    try:
        return json.loads(text), name
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, name, exc.lineno, exc.colno) from None


def parse_state(text):
    """``"3"`` is the integer state 3, anything else stays a string."""
    if isinstance(text, str):
        text = text.strip()
        return int(text) if _INT.match(text) else text
    return text


def parse_distribution(spec) -> SparseDistribution:
    """``"1:1/2,2:1/2"``, a bare state ``"1"``, or a mapping."""
    if isinstance(spec, dict):
        items = list(spec.items())
    else:
        items = []
        for part in str(spec).split(","):
            if not part.strip():
                continue
            s, _, w = part.rpartition(":") if ":" in part else (part, "", "1")
            items.append((s, w))
    try:
        return SparseDistribution({parse_state(s): parse_prob(w) for s, w in items})
    except ValueError as exc:
        raise InvalidModel(f"initial distribution {spec!r}: {exc}") from None


def parse_states(spec) -> list:
    if isinstance(spec, (list, tuple)):
        return [parse_state(s) for s in spec]
    return [parse_state(s) for s in str(spec).split(",") if s.strip()]


def _need(obj, key, where, name):
    if not isinstance(obj, dict):
        raise ParseError(f"{where}: expected an object", name)
    if key not in obj:
        raise ParseError(f"{where}: missing key {key!r}", name)
    return obj[key]


@dataclass
class LoadedChain:
    chain: MarkovChain
    init: SparseDistribution | None
    family: str | None = None
    params: dict = field(default_factory=dict)


def _family_params(obj: dict, overrides: dict) -> dict:
    params = {k: v for k, v in obj.items() if k != "family"}
    params.update({k: v for k, v in overrides.items() if v is not None})
    for k in ("p", "q"):
        if k in params:
            params[k] = parse_prob(params[k])
    if "N" in params:
        params["N"] = int(params["N"])
    return params


def chain_from_json(source, **overrides) -> LoadedChain:
    obj, name = read_json(source)
    if isinstance(obj, dict) and "family" in obj:
        fam = obj["family"]
        if fam not in BUILTIN_CHAINS:
            raise ParseError(f"family: unknown chain family {fam!r} "
                             f"(known: {', '.join(sorted(BUILTIN_CHAINS))})", name)
        params = _family_params(obj, overrides)
        init = params.pop("init", None)
        try:
            chain = BUILTIN_CHAINS[fam](**params)
        except TypeError as exc:
            raise ParseError(f"family {fam}: {exc}", name) from None
        return LoadedChain(chain, parse_distribution(init) if init is not None else None, fam, params)
    states = [parse_state(s) for s in _need(obj, "states", "chain", name)]
    rows: dict = {s: {} for s in states}
    for i, e in enumerate(_need(obj, "edges", "chain", name)):
        where = f"edges[{i}]"
        src = parse_state(_need(e, "from", where, name))
        dst = parse_state(_need(e, "to", where, name))
        if src not in rows:
            raise ParseError(f"{where}.from: undeclared state {src!r}", name)
        try:
            w = parse_prob(_need(e, "prob", where, name))
        except (InvalidModel, TypeError) as exc:
            raise ParseError(f"{where}.prob: {exc}", name) from None
        rows[src][dst] = rows[src].get(dst, 0) + w
    labels = {parse_state(s): v for s, v in obj.get("labels", {}).items()}
    try:
        chain = FiniteChain(rows, labels=labels, ap=obj.get("ap"), name=obj.get("name", name))
        init = parse_distribution(obj["init"]) if "init" in obj else None
    except InvalidModel as exc:
        raise ParseError(str(exc), name) from None
    return LoadedChain(chain, init)


def chain_to_json(chain: FiniteChain, init=None) -> dict:
    out = {"states": list(chain.states),
           "edges": [{"from": s, "to": t, "prob": str(p)} for s in chain.states
                     for t, p in chain.successors(s).items()],
           "labels": {str(s): sorted(chain.label(s)) for s in chain.states if chain.label(s)},
           "ap": sorted(chain.ap)}
    if init is not None:
        out["init"] = {str(s): str(p) for s, p in init.items()}
    return out


def dma_from_json(source) -> MullerAutomaton:
    obj, name = read_json(source)
    locs = _need(obj, "locations", "automaton", name)
    edges = []
    for i, e in enumerate(_need(obj, "edges", "automaton", name)):
        where = f"edges[{i}]"
        edges.append((_need(e, "from", where, name), frozenset(_need(e, "label", where, name)),
                      _need(e, "to", where, name)))
    ap = obj.get("ap")
    if ap is None:
        ap = sorted({a for _, u, _ in edges for a in u})
    try:
        return MullerAutomaton(locs, _need(obj, "initial", "automaton", name), edges,
                               _need(obj, "muller", "automaton", name), ap,
                               complete=bool(obj.get("complete", False)))
    except InvalidModel as exc:
        raise ParseError(str(exc), name) from None


def dma_to_json(dma: MullerAutomaton) -> dict:
    return {"locations": [q for q in dma.locations if q != SINK] + ([SINK] if SINK in dma.locations else []),
            "initial": dma.initial, "ap": sorted(dma.ap),
            "edges": [{"from": q, "label": sorted(u), "to": q2} for q, u, q2 in dma.edges()],
            "muller": [sorted(F) for F in sorted(dma.muller, key=sorted)]}


def sta_from_json(source) -> StaModel:
    obj, name = read_json(source)
    if isinstance(obj, dict) and "builtin" in obj:
        b = obj["builtin"]
        if b not in STA_LIBRARY:
            raise ParseError(f"builtin: unknown STA {b!r} (known: {', '.join(sorted(STA_LIBRARY))})", name)
        params = {k: v for k, v in obj.items() if k != "builtin"}
        return STA_LIBRARY[b](**params)
    clocks = list(_need(obj, "clocks", "sta", name))
    locations, dists, labels = [], {}, {}
    for i, l in enumerate(_need(obj, "locations", "sta", name)):
        where = f"locations[{i}]"
        ln = _need(l, "name", where, name)
        d = _need(l, "dist", where, name)
        try:
            dists[ln] = DelayDist(_need(d, "kind", f"{where}.dist", name), d.get("rate"))
        except InvalidModel as exc:
            raise ParseError(f"{where}.dist: {exc}", name) from None
        locations.append(ln)
        labels[ln] = l.get("labels", [])
    edges = []
    for i, e in enumerate(_need(obj, "edges", "sta", name)):
        where = f"edges[{i}]"
        try:
            guard = parse_guard(e.get("guard", "true"))
        except InvalidModel as exc:
            raise ParseError(f"{where}.guard: {exc}", name) from None
        edges.append(StaEdge(_need(e, "from", where, name), guard, frozenset(e.get("resets", [])),
                             _need(e, "to", where, name), e.get("weight", 1)))
    init = _need(obj, "initial", "sta", name)
    val = _need(init, "valuation", "initial", name)
    if isinstance(val, dict):
        val = [val.get(x, 0) for x in clocks]
    val = tuple(Fraction(str(v)) for v in val)
    try:
        return StaModel(clocks, locations, edges, dists, (_need(init, "location", "initial", name), val),
                        labels, name=obj.get("name", name))
    except InvalidModel as exc:
        raise ParseError(str(exc), name) from None


def sta_to_json(sta: StaModel) -> dict:
    return {
        "name": sta.name,
        "clocks": list(sta.clocks),
        "locations": [{"name": l, "labels": sorted(sta.labels[l]),
                       "dist": {"kind": sta.dists[l].kind, **({"rate": sta.dists[l].rate}
                                                              if sta.dists[l].rate else {})}}
                      for l in sta.locations],
        "initial": {"location": sta.initial[0], "valuation": [str(v) for v in sta.initial[1]]},
        "edges": [{"from": e.source, "guard": e.guard_text(), "resets": sorted(e.resets),
                   "to": e.target, "weight": e.weight} for e in sta.edges],
    }


def _ref(ref, base: str):
    if isinstance(ref, str) and not os.path.isabs(ref):
        return os.path.join(base, ref)
    return ref


def handle_from_json(source, **overrides) -> tuple[AbstractionHandle, LoadedChain | None]:
    """An abstraction handle and, for chain handles, the loaded concrete chain."""
    obj, name = read_json(source)
    base = os.path.dirname(name) if not name.startswith("<") else "."
    kind = _need(obj, "map", "handle", name)
    if kind == "sta-thick-graph":
        from .sta.analysis import sta_handle

        sta = sta_from_json(_ref(_need(obj, "concrete", "handle", name), base))
        handle, _, _ = sta_handle(sta, certify=False)
        return handle, None
    conc = chain_from_json(_ref(_need(obj, "concrete", "handle", name), base), **overrides)
    abst = chain_from_json(_ref(_need(obj, "abstract", "handle", name), base),
                           q=overrides.get("q"))
    if kind == "walk-to-Tf":
        alpha = walk_to_tf_alpha()
    elif kind == "identity":
        alpha = identity_alpha(getattr(conc.chain, "states", None))
    elif isinstance(kind, dict) and "table" in kind:
        alpha = table_alpha({parse_state(s): parse_state(a) for s, a in kind["table"].items()})
    else:
        raise ParseError(f"map: unknown abstraction map {kind!r}", name)
    return AbstractionHandle(conc.chain, abst.chain, alpha), conc


__all__ = [
    "LoadedChain", "chain_from_json", "chain_to_json", "dma_from_json", "dma_to_json",
    "handle_from_json", "parse_distribution", "parse_state", "parse_states", "read_json",
    "sorted_states", "sta_from_json", "sta_to_json",
]
