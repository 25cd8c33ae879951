"""Command line entry point: sample, krr, bench, synth."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time

import numpy as np

from . import __version__
from .errors import ContractError, DataError, NumericalError
from .features import SelfTensor
from .pipeline import KERNELS, ExperimentConfig, run_krr, run_sample
from .recursive import SamplerRunConfig, recursive_leverage_sample
from .samplers import RowSamplerConfig

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

log = logging.getLogger("tensorlev")


def _constant(text: str) -> tuple[str, float]:
    key, sep, val = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got {text!r}")
    try:
        num = float(val)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad value in {text!r}") from None
    return key, int(num) if key in ("jl_min", "reps_min", "tn_budget") else num


def _common(p: argparse.ArgumentParser, *, mu_required: bool = True) -> None:
    p.add_argument("--kernel", choices=KERNELS, default="poly")
    p.add_argument("--q", type=int, default=2, help="polynomial degree (poly kernel)")
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    g = p.add_mutually_exclusive_group(required=mu_required)
    g.add_argument("--mu", type=float, help="upper bound on the statistical dimension")
    g.add_argument("--mu-auto", action="store_true",
                   help="compute the statistical dimension exactly (n <= 2000)")
    p.add_argument("--samples-const", dest="C", type=float, default=4.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--verify", action="store_true", help="check against the exact kernel")
    p.add_argument("--format", dest="fmt", choices=("csv", "libsvm"), default="csv")
    p.add_argument("--label-col", type=int, default=0,
                   help="CSV label column; negative for none")
    p.add_argument("--const", dest="constants", type=_constant, action="append", default=[],
                   metavar="NAME=VALUE", help="override a sampler constant (c0..c3, jl_min, ...)")
    p.add_argument("--out", help="report path (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tensorlev", description=__doc__)
    ap.add_argument("--version", action="version", version=f"tensorlev {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw a leverage score sample of the feature rows")
    _common(p)
    p.add_argument("--data", action="append", required=True,
                   help="dataset path; repeat for distinct tensor factors")
    p.add_argument("--artifact", help="write sampled rows and Z as JSON here")

    p = sub.add_parser("krr", help="kernel ridge regression on sampled features")
    _common(p)
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--task", choices=("regression", "classification"), default="regression")

    p = sub.add_parser("bench", help="time the sampler across a grid of nnz")
    p.add_argument("--d", type=int, default=256)
    p.add_argument("--n", type=int, default=128)
    p.add_argument("--q", type=int, default=2)
    p.add_argument("--nnz", type=int, action="append",
                   help="grid point; repeat. Default: 4n, 8n, 16n")
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--mu", type=float, default=4.0)
    p.add_argument("--samples-const", dest="C", type=float, default=1.0)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", help="CSV path (default stdout)")
    p.add_argument("--report", help="also write a JSON report here")

    p = sub.add_parser("synth", help="write a seeded synthetic dataset")
    p.add_argument("--d", type=int, default=8)
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--n-test", type=int, default=0, help="also write a test split")
    p.add_argument("--radius", type=float, default=None, help="rescale to this max column norm")
    p.add_argument("--noise", type=float, default=0.3)
    p.add_argument("--nnz", type=int, help="sparse dataset with this many nonzeros")
    p.add_argument("--format", dest="fmt", choices=("csv", "libsvm"), default="csv")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--test-out")
    return ap


def _config(args) -> ExperimentConfig:
    data = args.data if args.command == "sample" else [args.train]
    return ExperimentConfig(
        kernel=args.kernel, q=args.q, eps=args.eps, lam=args.lam,
        mu=None if args.mu_auto else args.mu, C=args.C, seed=args.seed,
        trials=args.trials, threads=args.threads, verify=args.verify, fmt=args.fmt,
        data=list(data), test=getattr(args, "test", None),
        label_col=None if args.label_col < 0 else args.label_col,
        task=getattr(args, "task", "regression"), constants=dict(args.constants),
    )


def _emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def dump_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"


def artifact_json(result) -> str:
    doc = {"rows": result.rows.to_dict(), "Z": np.asarray(result.Z).tolist(),
           "lambdas": list(result.lambdas)}
    return json.dumps(doc, sort_keys=True, allow_nan=False) + "\n"


def cmd_sample(args) -> int:
    report, results = run_sample(_config(args))
    _emit(dump_report(report), args.out)
    if args.artifact:
        _emit(artifact_json(results[0]), args.artifact)
    return EXIT_OK


def cmd_krr(args) -> int:
    _emit(dump_report(run_krr(_config(args))), args.out)
    return EXIT_OK


def bench_rows(d, n, q, grid, eps, lam, mu, C, repeats, seed, threads=1) -> list[tuple[int, str, float]]:
    """Mean sampling seconds per grid point, averaged over repeats."""
    from .synthetic import sparse_dataset

    rows = []
    for nnz in grid:
        X = sparse_dataset(d, n, nnz, seed)
        total = 0.0
        for r in range(repeats):
            desc = SelfTensor(X, q)
            cfg = SamplerRunConfig(eps, lam, mu, C, seed + r, RowSamplerConfig(threads=threads))
            t0 = time.perf_counter()
            recursive_leverage_sample(desc, cfg)
            total += time.perf_counter() - t0
        rows.append((int(X.nnz), "sampling", total / repeats))
    return rows


def cmd_bench(args) -> int:
    if args.repeats < 1 or args.d < 1 or args.n < 2 or args.q < 1:
        raise ContractError("bench needs d >= 1, n >= 2, q >= 1, repeats >= 1")
    grid = args.nnz or [4 * args.n, 8 * args.n, 16 * args.n]
    if any(g < 1 for g in grid):
        raise ContractError("--nnz values must be positive")
    t0 = time.perf_counter()
    rows = bench_rows(args.d, args.n, args.q, grid, args.eps, args.lam, args.mu, args.C,
                      args.repeats, args.seed, args.threads)
    lines = [["nnz", "stage", "seconds"]] + [[a, b, f"{c:.6f}"] for a, b, c in rows]
    if args.out:
        with open(args.out, "w", newline="") as fh:
            csv.writer(fh).writerows(lines)
    else:
        csv.writer(sys.stdout).writerows(lines)
    if args.report:
        ratios = [b[2] / a[2] for a, b in zip(rows, rows[1:]) if a[2] > 0]
        report = {
            "tool": "tensorlev", "version": __version__, "command": "bench",
            "config": {k: v for k, v in vars(args).items() if k not in ("func",)},
            "n": args.n, "d": args.d, "q": args.q, "mu": float(args.mu),
            "s": SamplerRunConfig(args.eps, args.lam, args.mu, args.C).n_samples(args.n),
            "trials": [], "metrics": {"max_step_ratio": max(ratios, default=1.0)},
            "timings": {"total": time.perf_counter() - t0},
        }
        _emit(dump_report(report), args.report)
    return EXIT_OK


def cmd_synth(args) -> int:
    from .dataio import write_csv, write_libsvm
    from .synthetic import gaussian_cloud, regression_target, sparse_dataset

    if args.d < 1 or args.n < 1 or args.n_test < 0:
        raise ContractError("synth needs d >= 1, n >= 1, n-test >= 0")
    write = write_libsvm if args.fmt == "libsvm" else write_csv
    total = args.n + args.n_test
    if args.nnz is not None:
        X = sparse_dataset(args.d, total, args.nnz, args.seed)
        y = regression_target(X.toarray(), args.seed, args.noise)
    else:
        X = gaussian_cloud(args.d, total, args.seed, args.radius)
        y = regression_target(X, args.seed, args.noise)
    write(args.out, X[:, :args.n], y[:args.n])
    if args.n_test:
        if not args.test_out:
            raise ContractError("--n-test needs --test-out")
        write(args.test_out, X[:, args.n:], y[args.n:])
    return EXIT_OK


COMMANDS = {"sample": cmd_sample, "krr": cmd_krr, "bench": cmd_bench, "synth": cmd_synth}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ContractError as exc:
        print(f"tensorlev: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, OSError) as exc:
        print(f"tensorlev: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"tensorlev: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
