"""Reachability of 0 on the random walk across p, with the abstraction witness search."""

import argparse
import logging
from fractions import Fraction

from decisive.core import SparseDistribution, StateSet
from decisive.estimators import ChainSimulator, ExactEstimator, MonteCarloEstimator
from decisive.abstraction import soundness_witness_search
from decisive.evidence import Evidence
from decisive.models import random_walk, walk_escape, walk_tf_handle
from decisive.quantitative import approx_reach


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p", nargs="+", default=["1/4", "1/3", "2/5", "3/5", "2/3", "3/4"])
    ap.add_argument("--budget", type=int, default=10_000)
    ap.add_argument("--max-samples", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    logging.getLogger("decisive").setLevel(logging.ERROR)  # the scan assumes nothing on purpose
    print(f"{'p':>5} {'status':>16} {'lo':>9} {'hi':>9} {'min(1,(1-p)/p)':>15} {'witness':>8}")
    for text in args.p:
        p = Fraction(text)
        res = approx_reach(ExactEstimator(random_walk(p), exact=False), SparseDistribution.dirac(1),
                           {0}, StateSet.nothing(), eps=1e-3, budget=args.budget,
                           evidence=Evidence.assumed("scan"))
        h = walk_tf_handle(p)
        est = MonteCarloEstimator(ChainSimulator(h.concrete), samples=1000, seed=args.seed)
        escape = walk_escape(p, K=24, target_max=1) if p > Fraction(1, 2) else None
        ce = soundness_witness_search(h, SparseDistribution.dirac(1), estimator=est,
                                      max_samples=args.max_samples, escape=escape, horizon=2000)
        closed = min(Fraction(1), (1 - p) / p)
        print(f"{text:>5} {res.status.value:>16} {float(res.lo):9.5f} {float(res.hi):9.5f} "
              f"{float(closed):15.5f} {'found' if ce else 'none':>8}")


if __name__ == "__main__":
    main()
