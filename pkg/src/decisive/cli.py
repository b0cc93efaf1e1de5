"""Command-line front end.

Exit codes: 0 on success, 2 for refusals and invalid input (with a
diagnostic on stderr), 3 when an approximation stops without converging.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass

from . import io
from .abstraction import certify_complete, check_abstraction, soundness_witness_search
from .core import StateSet, as_distribution, explore, sorted_states
from .errors import DecisiveError, InvalidModel, Refusal
from .estimators import ChainSimulator, ExactEstimator, MonteCarloEstimator, TimeInterval
from .evidence import Evidence
from .models import walk_escape, walk_evidence, walk_tf_handle
from .omega import lift_initial, product
from .qualitative import (almost_sure_omega, attractor_graph, avoid_set, product_attractor,
                          qualitative_reachability, qualitative_repeated)
from .quantitative import (DEFAULT_BUDGET, Status, approx_reach, approx_repeated, approx_until,
                           quant_omega_attractor)
from .report import dumps
from .sta.analysis import (classify, sta_approx_quantitative, sta_check_qualitative,
                           sta_time_bounded, _configs)
from .sta.library import pacman_escape
from .sta.model import StaModel
from .sta.sampler import StaSimulator, location_set, min_jumps
from .sta.thickgraph import thick_graph

EXIT_OK, EXIT_REFUSED, EXIT_NOT_CONVERGED = 0, 2, 3
GRAPH_COMMANDS = {"product", "attractor-graph", "sta-thick-graph"}
WALK_ATTRACTOR = (0, 1)


class UsageError(DecisiveError):
    pass


@dataclass
class Outcome:
    payload: dict
    dot: str | None = None
    code: int = EXIT_OK


def _env_int(name: str, default: int) -> int:
    raw = os.environ.get(name)
    if raw is None or not raw.strip():
        return default
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{name} must be an integer, got {raw!r}") from None


# --- loading -----------------------------------------------------------------

def _need(args, name: str):
    value = getattr(args, name)
    if value is None:
        raise UsageError(f"--{name.replace('_', '-')} is required for {args.command}")
    return value


def _chain(args) -> io.LoadedChain:
    return io.chain_from_json(_need(args, "model"), p=args.p, q=args.q, N=args.N)


def _initial(args, loaded: io.LoadedChain):
    if args.init is not None:
        mu = io.parse_distribution(args.init)
    elif loaded.init is not None:
        mu = loaded.init
    else:
        raise UsageError("no initial distribution: pass --init or put one in the model")
    if not args.exact:
        mu = as_distribution({s: float(p) for s, p in mu.items()})
    chain = loaded.chain
    for s in mu.support():
        if not chain.has_state(s):
            raise InvalidModel(f"initial state {s!r} is not a state of the model")
    return mu


def _target(args, name: str = "target") -> StateSet:
    return StateSet.explicit(io.parse_states(_need(args, name)), name=name)


def _is_walk(loaded: io.LoadedChain) -> bool:
    return loaded.family == "random-walk"


def _known_avoid(args, loaded: io.LoadedChain):
    """Avoid-set from ``--avoid``, or the empty set for the irreducible walk."""
    if args.avoid is not None:
        if args.avoid.strip().lower() in ("", "none", "empty"):
            return StateSet.nothing()
        return StateSet.explicit(io.parse_states(args.avoid), name="avoid")
    if _is_walk(loaded):
        return StateSet.nothing()
    return None


def _with_depth(B: StateSet, args) -> StateSet:
    if args.depth is not None and B.is_explicit:
        return StateSet(members=B.members, depth=args.depth, name=B.name)
    return B


def _evidence(args, loaded: io.LoadedChain) -> Evidence | None:
    if args.evidence == "assumed":
        return Evidence.assumed("decisiveness declared on the command line")
    if loaded.chain.is_finite:
        return None
    if _is_walk(loaded) and loaded.params["p"] <= 0.5:
        p = loaded.params["p"]
        return walk_evidence(walk_tf_handle(p), p)
    return Evidence.assumed(f"no decisiveness certificate for {loaded.chain.name}")


def _estimator(args, chain):
    if args.samples:
        return MonteCarloEstimator(ChainSimulator(chain), samples=args.samples,
                                   confidence=args.confidence, seed=args.seed,
                                   workers=args.workers, threads=args.threads)
    return ExactEstimator(chain, exact=args.exact)


def _eps(args, sampled: bool) -> float:
    if args.eps is not None:
        return args.eps
    return 0.05 if sampled else 1e-6


def _sta(args) -> StaModel:
    return io.sta_from_json(_need(args, "model"))


def _result(res) -> Outcome:
    code = EXIT_OK if res.status is Status.CONVERGED else EXIT_NOT_CONVERGED
    return Outcome(res.to_dict(), code=code)


# --- chain commands ----------------------------------------------------------

def _product_dot(prod, states) -> str:
    ids = {s: f"p{i}" for i, s in enumerate(states)}
    lines = ["digraph product {", "  rankdir=LR;"]
    for s in states:
        label = repr(s).replace('"', '\\"')
        lines.append(f'  {ids[s]} [label="{label}"];')
    for s in states:
        for t, p in prod.successors(s).items():
            if t in ids:
                lines.append(f'  {ids[s]} -> {ids[t]} [label="{p}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def cmd_product(args) -> Outcome:
    loaded = _chain(args)
    dma = io.dma_from_json(_need(args, "dma"))
    prod = product(loaded.chain, dma)
    mu = lift_initial(_initial(args, loaded), dma)
    if not loaded.chain.is_finite and args.depth is None:
        raise UsageError("--depth is required to explore the product of an infinite chain")
    states = sorted_states(explore(prod, mu.support(), depth=args.depth))
    seen = set(states)
    edges = [[repr(s), repr(t), str(p)] for s in states for t, p in prod.successors(s).items()
             if t in seen]
    payload = {"states": [repr(s) for s in states], "initial": [repr(s) for s in mu.support()],
               "edges": edges, "bounded": args.depth is not None}
    return Outcome(payload, dot=_product_dot(prod, states))


def cmd_avoid_set(args) -> Outcome:
    loaded = _chain(args)
    B = _with_depth(_target(args), args)
    chain = loaded.chain
    if chain.is_finite:
        bt = avoid_set(chain, B)
        members = bt.states()
        scope = "all states"
    else:
        mu = _initial(args, loaded)
        bt = avoid_set(chain, B, roots=mu.support(), depth=args.depth)
        explored = sorted_states(explore(chain, mu.support(), depth=bt.depth))
        members = [s for s in explored if s in bt]
        scope = f"states within {bt.depth} steps of the initial support"
    return Outcome({"target": [repr(s) for s in B.states()], "avoid_set": [repr(s) for s in members],
                    "provenance": bt.provenance.value, "scope": scope})


def _attractor(args, loaded, dma, mu2):
    if args.attractor is not None:
        return product_attractor(io.parse_states(args.attractor), dma)
    if _is_walk(loaded):
        return product_attractor(WALK_ATTRACTOR, dma)
    if loaded.chain.is_finite:
        return StateSet.explicit(explore(product(loaded.chain, dma), mu2.support()))
    raise UsageError("--attractor is required for an infinite chain")


def cmd_attractor_graph(args) -> Outcome:
    loaded = _chain(args)
    dma = io.dma_from_json(_need(args, "dma"))
    mu2 = lift_initial(_initial(args, loaded), dma)
    A = _attractor(args, loaded, dma, mu2)
    depth = args.depth if args.depth is not None else (None if loaded.chain.is_finite else 64)
    graph = attractor_graph(product(loaded.chain, dma), A, mu=mu2, depth=depth)
    return Outcome(graph.to_dict(dma), dot=graph.to_dot(dma))


def cmd_check_qualitative(args) -> Outcome:
    loaded = _chain(args)
    mu = _initial(args, loaded)
    ev = _evidence(args, loaded)
    if args.dma is not None:
        dma = io.dma_from_json(args.dma)
        attractor = None
        if not loaded.chain.is_finite:
            attractor = _attractor(args, loaded, dma, lift_initial(mu, dma))
        depth = args.depth if args.depth is not None else (None if loaded.chain.is_finite else 64)
        verdict = almost_sure_omega(loaded.chain, mu, dma, attractor=attractor, depth=depth,
                                    evidence=ev)
        return Outcome(verdict.to_dict())
    B = _with_depth(_target(args), args)
    bt = _known_avoid(args, loaded)
    if args.repeated:
        bt2 = StateSet.everything() if bt is not None and bt.is_explicit and not bt.members else None
        verdict = qualitative_repeated(loaded.chain, mu, B, ev, btilde=bt, btilde2=bt2,
                                       depth=args.depth)
    else:
        verdict = qualitative_reachability(loaded.chain, mu, B, ev, btilde=bt, depth=args.depth)
    return Outcome(verdict.to_dict())


def _approx(args, kind: str) -> Outcome:
    loaded = _chain(args)
    mu = _initial(args, loaded)
    est = _estimator(args, loaded.chain)
    eps = _eps(args, bool(args.samples))
    B = _with_depth(_target(args), args)
    bt = _known_avoid(args, loaded)
    common = dict(eps=eps, budget=args.budget, evidence=_evidence(args, loaded))
    if kind == "reach":
        res = approx_reach(est, mu, B, bt, **common)
    elif kind == "until":
        res = approx_until(est, mu, _target(args, "until"), B, bt, **common)
    else:
        bt2 = StateSet.everything() if bt is not None and bt.is_explicit and not bt.members else None
        res = approx_repeated(est, mu, B, bt, bt2, **common)
    return _result(res)


def cmd_approx_reach(args) -> Outcome:
    return _approx(args, "reach")


def cmd_approx_until(args) -> Outcome:
    return _approx(args, "until")


def cmd_approx_repeated(args) -> Outcome:
    return _approx(args, "repeated")


def cmd_approx_omega(args) -> Outcome:
    loaded = _chain(args)
    dma = io.dma_from_json(_need(args, "dma"))
    mu = _initial(args, loaded)
    est = _estimator(args, loaded.chain)
    attractor = None
    if not loaded.chain.is_finite:
        attractor = _attractor(args, loaded, dma, lift_initial(mu, dma))
    depth = args.depth if args.depth is not None else (None if loaded.chain.is_finite else 64)
    res = quant_omega_attractor(loaded.chain, mu, dma, eps=_eps(args, bool(args.samples)),
                                budget=args.budget, attractor=attractor, estimator=est,
                                depth=depth, evidence=_evidence(args, loaded))
    return _result(res)


# --- abstraction commands ----------------------------------------------------

def cmd_check_abstraction(args) -> Outcome:
    handle, _ = io.handle_from_json(_need(args, "handle"), p=args.p, q=args.q, N=args.N)
    if not isinstance(handle.concrete, StaModel):
        check_abstraction(handle, args.bound)
        certify_complete(handle)
    payload = handle.to_dict()
    code = EXIT_OK if handle.is_abstraction else EXIT_REFUSED
    return Outcome(payload, code=code)


def cmd_witness_unsound(args) -> Outcome:
    handle, loaded = io.handle_from_json(_need(args, "handle"), p=args.p, q=args.q, N=args.N)
    samples = args.max_samples
    if isinstance(handle.concrete, StaModel):
        sta = handle.concrete
        mu = _configs(sta, None)
        sim = StaSimulator(sta)
        escape = pacman_escape(sta) if sta.name == "pacman" else None
    else:
        mu = _initial(args, loaded)
        sim = ChainSimulator(handle.concrete)
        escape = None
        if _is_walk(loaded) and loaded.params["p"] > 0.5:
            escape = walk_escape(loaded.params["p"], K=24, target_max=1)
    est = MonteCarloEstimator(sim, samples=min(1000, samples), confidence=args.confidence,
                              seed=args.seed, workers=args.workers, threads=args.threads)
    ce = soundness_witness_search(handle, mu, estimator=est, confidence=args.confidence,
                                  max_samples=samples, escape=escape)
    payload = {"found": ce is not None, "soundness": handle.soundness.value,
               "counterexample": ce.to_dict() if ce is not None else None,
               "max_samples": samples, "confidence": args.confidence, "seed": args.seed}
    return Outcome(payload)


# --- STA commands ------------------------------------------------------------

def cmd_sta_thick_graph(args) -> Outcome:
    sta = _sta(args)
    tg = thick_graph(sta)
    payload = tg.to_dict()
    payload["class"] = classify(sta).to_dict()
    return Outcome(payload, dot=tg.to_dot())


def cmd_sta_check(args) -> Outcome:
    sta = _sta(args)
    dma = io.dma_from_json(_need(args, "dma"))
    return Outcome(sta_check_qualitative(sta, dma).to_dict())


def _sta_sampling(args) -> dict:
    samples = args.samples or 100_000
    return dict(samples=samples, confidence=args.confidence, seed=args.seed,
                workers=args.workers, threads=args.threads, budget=args.budget)


def cmd_sta_approx(args) -> Outcome:
    sta = _sta(args)
    dma = io.dma_from_json(_need(args, "dma"))
    res = sta_approx_quantitative(sta, None, dma, eps=_eps(args, True), **_sta_sampling(args))
    return _result(res)


def cmd_sta_time_bounded(args) -> Outcome:
    sta = _sta(args)
    if args.target is None and args.min_jumps is None:
        raise UsageError("sta-time-bounded needs --target locations, --min-jumps, or both")
    locs = [l.strip() for l in args.target.split(",") if l.strip()] if args.target else None
    B = location_set(sta, locs) if locs else None
    if args.min_jumps is not None:
        B = min_jumps(args.min_jumps, B)
    try:
        interval = TimeInterval.parse(_need(args, "interval"))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    non_zeno = None
    if args.evidence == "assumed":
        non_zeno = Evidence.assumed("non-Zeno behaviour declared on the command line")
    res = sta_time_bounded(sta, None, B, interval, eps=_eps(args, True),
                           non_zeno=non_zeno, **_sta_sampling(args))
    return _result(res)


COMMANDS = {
    "product": (cmd_product, "product of a chain with a Muller automaton"),
    "avoid-set": (cmd_avoid_set, "states that reach the target with probability 0"),
    "attractor-graph": (cmd_attractor_graph, "reachability graph over a finite attractor of the product"),
    "check-qualitative": (cmd_check_qualitative, "almost-sure / positive / zero verdicts"),
    "approx-reach": (cmd_approx_reach, "interval for P(F target)"),
    "approx-until": (cmd_approx_until, "interval for P(until U target)"),
    "approx-repeated": (cmd_approx_repeated, "interval for P(GF target)"),
    "approx-omega": (cmd_approx_omega, "interval for the Muller acceptance probability"),
    "check-abstraction": (cmd_check_abstraction, "one-step abstraction check and completeness"),
    "witness-unsound": (cmd_witness_unsound, "statistical search for an unsoundness witness"),
    "sta-thick-graph": (cmd_sta_thick_graph, "thick graph of a stochastic timed automaton"),
    "sta-check": (cmd_sta_check, "almost-sure Muller check of an STA"),
    "sta-approx": (cmd_sta_approx, "interval for the Muller probability of an STA"),
    "sta-time-bounded": (cmd_sta_time_bounded, "interval for reaching locations within a time interval"),
}


# --- output ------------------------------------------------------------------

def render_text(obj, indent: int = 0) -> str:
    pad = "  " * indent
    lines = []
    if isinstance(obj, dict):
        for k, v in obj.items():
            if isinstance(v, (dict, list)) and v and not _flat(v):
                lines.append(f"{pad}{k}:")
                lines.append(render_text(v, indent + 1))
            else:
                lines.append(f"{pad}{k}: {_scalar(v)}")
    elif isinstance(obj, list):
        for v in obj:
            if isinstance(v, (dict, list)) and not _flat(v):
                lines.append(f"{pad}-")
                lines.append(render_text(v, indent + 1))
            else:
                lines.append(f"{pad}- {_scalar(v)}")
    else:
        lines.append(pad + _scalar(obj))
    return "\n".join(lines)


def _flat(v) -> bool:
    return isinstance(v, list) and all(not isinstance(x, (dict, list)) for x in v)


def _scalar(v) -> str:
    if isinstance(v, list):
        return "[" + ", ".join(_scalar(x) for x in v) + "]"
    if v is None:
        return "-"
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    g = shared.add_argument_group("inputs")
    g.add_argument("--model", help="chain or STA JSON file")
    g.add_argument("--dma", help="Muller automaton JSON file")
    g.add_argument("--handle", help="abstraction handle JSON file")
    g.add_argument("--p", help="override the family parameter p (e.g. 1/3)")
    g.add_argument("--q", help="override the family parameter q")
    g.add_argument("--N", type=int, help="override the truncation size N")
    g.add_argument("--init", help='initial distribution, e.g. "1:1" or "0:1/2,3:1/2"')
    g.add_argument("--target", help="target states (comma separated); locations for STA")
    g.add_argument("--until", help="states allowed before the target (approx-until)")
    g.add_argument("--avoid", help='known avoid-set of the target ("none" for empty)')
    g.add_argument("--attractor", help="finite attractor of the chain (comma separated)")
    g.add_argument("--repeated", action="store_true", help="check GF target instead of F target")
    g.add_argument("--depth", type=int, help="exploration depth certificate for infinite chains")
    g.add_argument("--interval", help="time interval, e.g. [0,1]")
    g.add_argument("--min-jumps", type=int, help="STA target: runs with at least this many jumps")
    g.add_argument("--bound", type=int, default=64, help="fiber points per abstract state")
    a = shared.add_argument_group("analysis")
    a.add_argument("--eps", type=float, help="target interval width")
    a.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="iteration budget")
    a.add_argument("--samples", type=int, help="Monte-Carlo samples per estimate")
    a.add_argument("--max-samples", type=int, default=1_000_000, help="witness search cap")
    a.add_argument("--confidence", type=float, default=0.99)
    a.add_argument("--seed", type=int, help="random seed (default $DECISIVE_SEED or 0)")
    a.add_argument("--exact", action="store_true", help="exact rational arithmetic")
    a.add_argument("--evidence", choices=("auto", "assumed"), default="auto")
    a.add_argument("--threads", type=int, help="threads (default $DECISIVE_THREADS or 1)")
    a.add_argument("--workers", type=int, default=1, help="independent random streams")
    o = shared.add_argument_group("output")
    o.add_argument("--out", choices=("json", "dot", "text"), default="json")
    o.add_argument("-o", "--output", help="write the report to this file instead of stdout")
    o.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="decisive", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[shared], help=help_text, description=help_text)
    return parser


def run(argv=None) -> tuple[int, str]:
    """Parse ``argv`` and run the command; returns the exit code and the report."""
    args = build_parser().parse_args(argv)
    if args.verbose:
        logging.getLogger().setLevel(logging.INFO)
    if args.seed is None:
        args.seed = _env_int("DECISIVE_SEED", 0)
    if args.threads is None:
        args.threads = _env_int("DECISIVE_THREADS", 1)
    if args.out == "dot" and args.command not in GRAPH_COMMANDS:
        raise UsageError(f"--out dot is only available for {', '.join(sorted(GRAPH_COMMANDS))}")
    fn, _ = COMMANDS[args.command]
    outcome = fn(args)
    if args.out == "dot":
        text = outcome.dot
    elif args.out == "text":
        text = render_text({"command": args.command, **outcome.payload}) + "\n"
    else:
        text = dumps({"command": args.command, **outcome.payload})
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
        text = ""
    return outcome.code, text


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s",
                        stream=sys.stderr)
    try:
        code, text = run(argv)
    except Refusal as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except (DecisiveError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
