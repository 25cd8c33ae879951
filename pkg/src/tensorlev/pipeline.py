"""Experiment plumbing shared by the CLI and the scripts."""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp

from . import __version__
from .dataio import ingest
from .errors import ContractError, DataError
from .features import SelfTensor, TensorProduct
from .kernels import (
    gaussian_gpk_spec,
    gaussian_kernel_exact,
    gpk_kernel_exact,
    ntk_gpk_spec,
    ntk_kernel_exact,
    statistical_dimension,
)
from .krr import cross_kernel, krr_predict, rmse
from .recursive import SamplerRunConfig, recursive_leverage_sample
from .oracle import spectral_check
from .samplers import RowSamplerConfig

KERNELS = ("poly", "gaussian", "ntk", "tensor")
MU_AUTO_MAX_N = 2000


@dataclass
class ExperimentConfig:
    kernel: str = "poly"
    q: int = 2
    eps: float = 0.5
    lam: float = 1.0
    mu: float | None = None  # None selects exact computation
    C: float = 4.0
    seed: int = 0
    trials: int = 1
    threads: int = 1
    verify: bool = False
    fmt: str = "csv"
    data: list[str] = field(default_factory=list)
    test: str | None = None
    label_col: int | None = 0
    task: str = "regression"
    constants: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.kernel not in KERNELS:
            raise ContractError(f"unknown kernel {self.kernel!r}")
        if not 0 < self.eps < 1:
            raise ContractError("--eps must lie in (0, 1)")
        if not self.lam > 0:
            raise ContractError("--lambda must be positive")
        if self.mu is not None and not self.mu >= 1:
            raise ContractError("--mu must be at least 1")
        if self.q < 1:
            raise ContractError("--q must be at least 1")
        if self.trials < 1 or self.threads < 1:
            raise ContractError("--trials and --threads must be positive")
        if not self.C > 0:
            raise ContractError("--samples-const must be positive")
        if self.fmt not in ("csv", "libsvm"):
            raise ContractError(f"unknown format {self.fmt!r}")
        if self.task not in ("regression", "classification"):
            raise ContractError(f"unknown task {self.task!r}")
        bad = set(self.constants) - {"c0", "c1", "c2", "c3", "jl_min", "reps_min", "tn_budget"}
        if bad:
            raise ContractError(f"unknown constant overrides {sorted(bad)}")
        if not self.data:
            raise ContractError("no input data given")

    def to_dict(self) -> dict:
        return asdict(self)

    def sampler_config(self) -> RowSamplerConfig:
        return RowSamplerConfig(**self.constants, threads=self.threads)


@dataclass
class Problem:
    """A feature descriptor plus the Gram matrices it is checked against."""

    desc: object
    target_kernel: object  # callable () -> Gram of Phi (truncated for GPK)
    exact_kernel: object  # callable () -> untruncated kernel
    meta: dict


def _dense(X) -> np.ndarray:
    return X.toarray() if sp.issparse(X) else np.asarray(X, dtype=float)


def load_data(cfg: ExperimentConfig, path: str):
    return ingest(path, cfg.fmt, cfg.label_col)


def build_problem(cfg: ExperimentConfig, datasets: list) -> Problem:
    X = datasets[0]
    if cfg.kernel == "tensor":
        if len({D.shape for D in datasets}) != 1:
            raise DataError("tensor-product datasets must share one shape")
        desc = TensorProduct(tuple(datasets))

        def gram():
            K = np.ones((desc.n, desc.n))
            for D in datasets:
                K *= _dense(D.T @ D)
            return K
        return Problem(desc, gram, gram, {"q": len(datasets)})
    if cfg.kernel == "poly":
        desc = SelfTensor(X, cfg.q)

        def gram():
            return _dense(X.T @ X) ** cfg.q
        return Problem(desc, gram, gram, {"q": cfg.q})
    Xd = _dense(X)
    if cfg.kernel == "gaussian":
        spec = gaussian_gpk_spec(Xd, cfg.eps, cfg.lam)
        exact = lambda: gaussian_kernel_exact(Xd)  # noqa: E731
    else:
        spec = ntk_gpk_spec(Xd, cfg.eps, cfg.lam)
        exact = lambda: ntk_kernel_exact(Xd)  # noqa: E731
    return Problem(spec.descriptor(), lambda: gpk_kernel_exact(spec), exact, {"q": spec.q, "gpk": spec.to_json()})


def resolve_mu(cfg: ExperimentConfig, prob: Problem) -> float:
    if cfg.mu is not None:
        return float(cfg.mu)
    if prob.desc.n > MU_AUTO_MAX_N:
        raise ContractError(f"--mu-auto needs n <= {MU_AUTO_MAX_N}; pass --mu explicitly")
    return max(1.0, statistical_dimension(prob.target_kernel(), cfg.lam))


def _finite(x: float | None) -> float | None:
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def run_sample(cfg: ExperimentConfig) -> tuple[dict, list]:
    """Sample, optionally verify. Returns the report and per-trial results."""
    cfg.validate()
    timings = {}
    t0 = time.perf_counter()
    loaded = [load_data(cfg, p) for p in cfg.data]
    datasets = [X for X, _ in loaded]
    timings["ingest"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    prob = build_problem(cfg, datasets)
    mu = resolve_mu(cfg, prob)
    timings["setup"] = time.perf_counter() - t0
    K = prob.target_kernel() if cfg.verify else None
    trials, results = [], []
    for tr in range(cfg.trials):
        seed = cfg.seed + tr
        run_cfg = SamplerRunConfig(cfg.eps, cfg.lam, mu, cfg.C, seed, cfg.sampler_config())
        t0 = time.perf_counter()
        res = recursive_leverage_sample(prob.desc, run_cfg)
        secs = time.perf_counter() - t0
        entry = {"seed": seed, "s": res.s, "levels": len(res.lambdas), "seconds": secs,
                 "flagged": int(res.rows.flagged.sum()), "sandwich_pass": None, "max_dev": None}
        if K is not None:
            ok, dev = spectral_check(K, res.Z, cfg.lam, cfg.eps)
            entry["sandwich_pass"], entry["max_dev"] = ok, _finite(dev)
        trials.append(entry)
        results.append(res)
    timings["sampling"] = sum(t["seconds"] for t in trials)
    report = _report("sample", cfg, prob, mu, results[0].s, trials, timings)
    if cfg.verify and cfg.kernel in ("gaussian", "ntk"):
        report["metrics"]["truncation_error_fro"] = float(np.linalg.norm(K - prob.exact_kernel()))
    return report, results


def run_krr(cfg: ExperimentConfig) -> dict:
    cfg.validate()
    if cfg.kernel == "tensor":
        raise ContractError("krr needs a kernel with a closed form: poly, gaussian or ntk")
    if cfg.test is None:
        raise ContractError("krr needs --test data")
    timings = {}
    t0 = time.perf_counter()
    Xtr, ytr = load_data(cfg, cfg.data[0])
    Xte, yte = load_data(cfg, cfg.test)
    if ytr is None or yte is None:
        raise DataError("krr needs labels in both train and test data")
    Xtr, Xte = _dense(Xtr), _dense(Xte)
    if Xtr.shape[0] != Xte.shape[0]:
        d = max(Xtr.shape[0], Xte.shape[0])
        Xtr = np.vstack([Xtr, np.zeros((d - Xtr.shape[0], Xtr.shape[1]))])
        Xte = np.vstack([Xte, np.zeros((d - Xte.shape[0], Xte.shape[1]))])
    timings["ingest"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    prob = build_problem(cfg, [Xtr])
    mu = resolve_mu(cfg, prob)
    Kx = cross_kernel(cfg.kernel, Xte, Xtr, cfg.q)
    K = prob.target_kernel() if cfg.verify else None
    timings["setup"] = time.perf_counter() - t0
    trials = []
    for tr in range(cfg.trials):
        seed = cfg.seed + tr
        run_cfg = SamplerRunConfig(cfg.eps, cfg.lam, mu, cfg.C, seed, cfg.sampler_config())
        t0 = time.perf_counter()
        res = recursive_leverage_sample(prob.desc, run_cfg)
        pred = krr_predict(res.Z, ytr, cfg.lam, Kx, cfg.task)
        entry = {"seed": seed, "s": res.s, "levels": len(res.lambdas), "seconds": time.perf_counter() - t0,
                 "flagged": int(res.rows.flagged.sum()), "sandwich_pass": None, "max_dev": None}
        if K is not None:
            ok, dev = spectral_check(K, res.Z, cfg.lam, cfg.eps)
            entry["sandwich_pass"], entry["max_dev"] = ok, _finite(dev)
        if cfg.task == "classification":
            entry["error_rate"] = float(np.mean(pred != yte))
        else:
            entry["rmse"] = rmse(pred, yte)
        trials.append(entry)
    timings["sampling"] = sum(t["seconds"] for t in trials)
    report = _report("krr", cfg, prob, mu, trials[0]["s"], trials, timings)
    key = "error_rate" if cfg.task == "classification" else "rmse"
    report["metrics"][key] = float(np.mean([t[key] for t in trials]))
    if cfg.verify:
        exact = krr_predict_exact(prob.exact_kernel(), ytr, cfg.lam, Kx, cfg.task)
        report["metrics"]["exact_" + key] = (float(np.mean(exact != yte)) if cfg.task == "classification"
                                             else rmse(exact, yte))
    return report


def krr_predict_exact(K, y, lam, Kx, task="regression"):
    """Exact kernel ridge regression, for comparison."""
    from .krr import one_hot
    n = K.shape[0]
    if task == "classification":
        Y, classes = one_hot(np.asarray(y))
        return classes[np.argmax(Kx @ np.linalg.solve(K + lam * np.eye(n), Y), axis=1)]
    return Kx @ np.linalg.solve(K + lam * np.eye(n), np.asarray(y, dtype=float))


def _report(command, cfg, prob, mu, s, trials, timings) -> dict:
    X = prob.desc.datasets[0] if hasattr(prob.desc, "datasets") else prob.desc.X
    return {
        "tool": "tensorlev",
        "version": __version__,
        "command": command,
        "config": cfg.to_dict(),
        "n": int(prob.desc.n),
        "d": int(X.shape[0]),
        "q": int(prob.meta["q"]),
        "mu": float(mu),
        "s": int(s),
        "trials": trials,
        "metrics": {},
        "timings": {k: float(v) for k, v in timings.items()},
    }
