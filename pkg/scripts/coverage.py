"""Empirical coverage of Monte-Carlo intervals for time-bounded reachability on the exponential loop."""

import argparse

from decisive.sta.analysis import sta_time_bounded
from decisive.sta.library import exponential_self_loop, jump_probability
from decisive.sta.sampler import min_jumps


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=200)
    ap.add_argument("--samples", type=int, default=500)
    ap.add_argument("--confidence", type=float, default=0.95)
    args = ap.parse_args()
    for rate, T in ((1.0, 1.0), (2.0, 0.5), (0.5, 3.0)):
        sta = exponential_self_loop(rate)
        truth = jump_probability(rate, T)
        covered, width = 0, 0.0
        for seed in range(args.seeds):
            r = sta_time_bounded(sta, None, min_jumps(1), f"[0,{T}]", eps=0.5, samples=args.samples,
                                 seed=seed, confidence=args.confidence)
            covered += r.contains(truth)
            width += r.hi - r.lo
        print(f"rate {rate} T {T}: truth {truth:.4f}, coverage {covered / args.seeds:.3f}, "
              f"mean width {width / args.seeds:.4f}")


if __name__ == "__main__":
    main()
