"""Probability of reaching l2 in the pacman STA: closed form, grid iteration and Monte Carlo."""

import argparse
import logging

from decisive.core import StateSet
from decisive.estimators import MonteCarloEstimator
from decisive.evidence import Evidence
from decisive.quantitative import approx_reach
from decisive.sta.analysis import _configs
from decisive.sta.library import (pacman_escape, pacman_reach_by_iteration, pacman_reach_probability,
                                  pacman_sta)
from decisive.sta.sampler import StaSimulator, location_set

DRIFT = Evidence.assumed("y drifts up to 1, so runs enter the escape region")


def main():
    logging.getLogger("decisive").setLevel(logging.ERROR)  # the DRIFT assumption is stated above
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nu", type=float, nargs="+", default=[0.0, 0.25, 0.5, 0.75])
    ap.add_argument("--samples", type=int, default=200_000)
    ap.add_argument("--eta", type=float, default=1e-3, help="escape threshold on 1-y")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    print(f"{'nu':>5} {'closed':>8} {'grid':>8} {'mc lo':>8} {'mc hi':>8}")
    for nu in args.nu:
        sta = pacman_sta(nu)
        est = MonteCarloEstimator(StaSimulator(sta), samples=args.samples, confidence=0.99,
                                  seed=args.seed)
        res = approx_reach(est, _configs(sta, None), location_set(sta, ["l2"]), StateSet.nothing(),
                           escape=pacman_escape(sta, args.eta), eps=0.02, evidence=DRIFT)
        print(f"{nu:5.2f} {pacman_reach_probability(nu):8.5f} {pacman_reach_by_iteration(nu):8.5f} "
              f"{res.lo:8.5f} {res.hi:8.5f}")


if __name__ == "__main__":
    main()
