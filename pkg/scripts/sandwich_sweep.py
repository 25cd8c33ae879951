#!/usr/bin/env python3
"""Sandwich success rate and sample size as the sample constant C varies."""
import argparse
import logging
import time

from tensorlev.features import SelfTensor
from tensorlev.kernels import lambda_for_statistical_dimension
from tensorlev.recursive import SamplerRunConfig, recursive_leverage_sample, spectral_check
from tensorlev.synthetic import gaussian_cloud


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--d", type=int, default=8)
    ap.add_argument("--n", type=int, default=64)
    ap.add_argument("--q", type=int, default=3)
    ap.add_argument("--eps", type=float, default=0.5)
    ap.add_argument("--slam", type=float, default=8.0, help="target statistical dimension")
    ap.add_argument("--C", type=float, nargs="+", default=[0.5, 1.0, 2.0, 4.0])
    ap.add_argument("--seeds", type=int, default=10)
    args = ap.parse_args()
    logging.basicConfig(level=logging.ERROR)

    X = gaussian_cloud(args.d, args.n, seed=1)
    K = (X.T @ X) ** args.q
    lam = lambda_for_statistical_dimension(K, args.slam)
    print(f"lambda = {lam:.5g} (s_lambda = {args.slam})")
    print("C,s,pass_rate,worst_max_dev,seconds_per_run")
    for C in args.C:
        passes, worst, t0 = 0, 0.0, time.perf_counter()
        for seed in range(args.seeds):
            res = recursive_leverage_sample(SelfTensor(X, args.q), SamplerRunConfig(args.eps, lam, args.slam, C, seed))
            ok, dev = spectral_check(K, res.Z, lam, args.eps)
            passes += ok
            worst = max(worst, dev)
        secs = (time.perf_counter() - t0) / args.seeds
        print(f"{C},{res.s},{passes / args.seeds:.2f},{worst:.3f},{secs:.2f}")


if __name__ == "__main__":
    main()
