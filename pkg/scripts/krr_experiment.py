#!/usr/bin/env python3
"""Approximate versus exact kernel ridge regression on a synthetic task."""
import argparse
import logging

import numpy as np

from tensorlev.kernels import gaussian_gpk_spec, gaussian_kernel_exact, ntk_gpk_spec, ntk_kernel_exact, statistical_dimension
from tensorlev.krr import cross_kernel, krr_predict, rmse
from tensorlev.recursive import SamplerRunConfig, recursive_leverage_sample
from tensorlev.synthetic import regression_task


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--kernel", choices=("gaussian", "ntk"), default="gaussian")
    ap.add_argument("--d", type=int, default=10)
    ap.add_argument("--n", type=int, default=500)
    ap.add_argument("--n-test", type=int, default=200)
    ap.add_argument("--noise", type=float, default=0.3)
    ap.add_argument("--lam", type=float, default=1.0)
    ap.add_argument("--eps", type=float, default=0.5)
    ap.add_argument("--C", type=float, default=1.0)
    ap.add_argument("--seeds", type=int, default=5)
    args = ap.parse_args()
    logging.basicConfig(level=logging.ERROR)

    Xtr, ytr, Xte, yte = regression_task(args.d, args.n, args.n_test, seed=0, noise=args.noise)
    if args.kernel == "gaussian":
        K, spec = gaussian_kernel_exact(Xtr), gaussian_gpk_spec(Xtr, args.eps, args.lam)
    else:
        K, spec = ntk_kernel_exact(Xtr), ntk_gpk_spec(Xtr, args.eps, args.lam)
    Kx = cross_kernel(args.kernel, Xte, Xtr)
    exact = rmse(Kx @ np.linalg.solve(K + args.lam * np.eye(args.n), ytr), yte)
    s_lam = statistical_dimension(K, args.lam)
    print(f"kernel={args.kernel} q={spec.q} s_lambda={s_lam:.2f} exact_rmse={exact:.4f}")
    print("seed,s,rmse,relative_gap")
    for seed in range(args.seeds):
        res = recursive_leverage_sample(spec.descriptor(),
                                        SamplerRunConfig(args.eps, args.lam, max(1.0, s_lam), args.C, seed))
        r = rmse(krr_predict(res.Z, ytr, args.lam, Kx), yte)
        print(f"{seed},{res.s},{r:.4f},{abs(r - exact) / exact:.4f}")


if __name__ == "__main__":
    main()
