#!/usr/bin/env python3
"""Sampling wall time across a doubling grid of nnz at fixed n and q."""
import argparse
import logging

from tensorlev.cli import bench_rows


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--d", type=int, default=512)
    ap.add_argument("--n", type=int, default=64)
    ap.add_argument("--q", type=int, default=2)
    ap.add_argument("--start", type=int, default=256, help="smallest nnz")
    ap.add_argument("--points", type=int, default=4)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()
    logging.basicConfig(level=logging.ERROR)

    grid = [args.start * 2**i for i in range(args.points)]
    rows = bench_rows(args.d, args.n, args.q, grid, 0.5, 1.0, 4.0, 1.0, args.repeats, 0)
    print("nnz,seconds,ratio_to_previous")
    prev = None
    for nnz, _, secs in rows:
        print(f"{nnz},{secs:.3f},{'' if prev is None else f'{secs / prev:.2f}'}")
        prev = secs


if __name__ == "__main__":
    main()
