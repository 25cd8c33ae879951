"""Row norm samplers for Phi (B^T B + lam I)^{-1/2}.

Three variants share one sampling engine:

* distinct datasets, Phi = X^(1) (x) ... (x) X^(q)
* self-tensor, Phi = X^{(x) q}, sketched through shared-sign SRHT families
* GPK features, a weighted direct sum of self-tensor blocks

Each sample picks its multi-index one level at a time. At level a the
engine estimates, for every hash bucket of rows, the mass of all rows
whose first a-1 indices match the prefix drawn so far, samples a bucket,
then samples a row inside it. Those distributions depend only on the
prefix and the built sketches, so samples sharing a prefix share the
work; every sample still consumes its own uniforms, so draws stay i.i.d.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .features import Gpk, SelfTensor, TensorProduct, as_data_matrix, dense_rows
from .rng import RngStream
from .sketches import (
    GaussianJlSpec,
    gaussian_jl_apply,
    next_pow2,
    shared_sign_family_apply_all,
    shared_sign_family_build,
)
from .tensornorm import TensorNormConfig, TensorNormDs, lower_median, tnds_build

log = logging.getLogger(__name__)


def _log2n(n: int) -> float:
    return max(1.0, math.log2(n))


@dataclass(frozen=True)
class RowSamplerConfig:
    """Constants of the sampler. The c_i scale the asymptotic sizes.

    distinct datasets: JL rows c1 q log n, bucket sketch rows c2 q^2,
    bucket repetitions c3 log n.
    self-tensor / GPK: JL rows c0 q^2 log n, families c1 log n, SRHT rows
    c2 (q^3 + q^2 kappa) log n, bucket sketch rows c3 q^2.
    """

    c0: float = 1.0
    c1: float = 1.0
    c2: float = 1.0
    c3: float = 1.0
    jl_min: int = 1024
    reps_min: int = 3
    tn: TensorNormConfig | None = None
    tn_budget: int = 16384
    tn_eps: float | None = None
    threads: int = 1

    def tn_config(self, n: int) -> TensorNormConfig:
        """Sketch sizes for the norm structures.

        The theoretical accuracy 1/(20q) would need enormous sketches, so
        unless given explicitly the sizes follow a per-column budget:
        small n gets large sketches, large n smaller ones.
        """
        if self.tn is not None:
            return self.tn
        m = int(np.clip(next_pow2(self.tn_budget // max(n, 1) + 1) // 2, 128, 2048))
        return TensorNormConfig(sketch_cap=m, srht_dim=max(32, m // 4), reps=5, threads=self.threads)

    def repetitions(self, c: float, n: int) -> int:
        return max(self.reps_min, math.ceil(c * _log2n(n)))


# ---------------------------------------------------------------- data types


@dataclass(frozen=True, eq=False)
class SampledRows:
    """s sampled rows. idx[l, :block[l]] is the multi-index, the rest is -1."""

    block: np.ndarray
    idx: np.ndarray
    weight: np.ndarray
    prob: np.ndarray
    flagged: np.ndarray

    @property
    def s(self) -> int:
        return len(self.block)

    def __len__(self) -> int:
        return self.s

    def entries(self) -> list[tuple[int, tuple[int, ...], float]]:
        return [(int(b), tuple(int(i) for i in row[:b]), float(w))
                for b, row, w in zip(self.block, self.idx, self.weight)]

    def to_dict(self) -> dict:
        return {
            "block": self.block.tolist(),
            "idx": self.idx.tolist(),
            "weight": self.weight.tolist(),
            "prob": self.prob.tolist(),
            "flagged": self.flagged.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SampledRows":
        return cls(np.asarray(doc["block"], dtype=np.int64), np.asarray(doc["idx"], dtype=np.int64).reshape(len(doc["block"]), -1),
                   np.asarray(doc["weight"], dtype=float), np.asarray(doc["prob"], dtype=float),
                   np.asarray(doc["flagged"], dtype=bool))


@dataclass(frozen=True, eq=False)
class RegularizedBasis:
    """(B^T B + lam I)^{-1/2} held as a thin SVD of B."""

    lam: float
    V: np.ndarray  # n x r right singular vectors
    sigma: np.ndarray

    @property
    def kappa(self) -> float:
        top = self.sigma[0] ** 2 if self.sigma.size else 0.0
        return math.sqrt(top / self.lam + 1)

    def apply_right(self, M) -> np.ndarray:
        M = np.asarray(M, dtype=float)
        base = M / math.sqrt(self.lam)
        if not self.sigma.size:
            return base
        coef = 1 / np.sqrt(self.sigma**2 + self.lam) - 1 / math.sqrt(self.lam)
        return base + ((M @ self.V) * coef) @ self.V.T


def reg_inv_sqrt(B, lam: float) -> RegularizedBasis:
    if not lam > 0:
        raise ContractError("lambda must be positive")
    B = np.atleast_2d(np.asarray(B.toarray() if hasattr(B, "toarray") else B, dtype=float))
    if not np.all(np.isfinite(B)):
        raise ContractError("B has non-finite entries")
    _, sig, Vt = np.linalg.svd(B, full_matrices=False)
    keep = sig > sig.max(initial=0.0) * 1e-12 * max(B.shape) if sig.size else sig > 0
    keep &= sig > 0
    return RegularizedBasis(float(lam), Vt[keep].T.copy(), sig[keep].copy())


@dataclass(frozen=True, eq=False)
class BucketHash:
    n_buckets: int
    h: np.ndarray

    @classmethod
    def build(cls, d: int, n_buckets: int, rng: RngStream) -> "BucketHash":
        if n_buckets < 1:
            raise ContractError("need at least one bucket")
        return cls(int(n_buckets), rng.generator().integers(0, n_buckets, size=d))

    def inverse(self, r: int) -> np.ndarray:
        return np.nonzero(self.h == r)[0]

    def nonempty(self) -> tuple[np.ndarray, list[np.ndarray]]:
        """Nonempty bucket ids and their member lists."""
        order = np.argsort(self.h, kind="stable")
        ids, starts = np.unique(self.h[order], return_index=True)
        return ids, np.split(order, starts[1:])


# ---------------------------------------------------------------- engine


@dataclass(eq=False)
class _Plan:
    """Everything a draw needs, built once per sampler call."""

    q: int
    n: int
    level_data: list  # dataset used at level a (0-based)
    v: np.ndarray  # starting diagonal D^1
    tns: list[TensorNormDs]
    bucket_tn: list[int]  # TN index used with bucket sketch k
    members: list[np.ndarray]  # rows in each nonempty bucket
    W: dict  # id(dataset) -> list over k of (rows x n, bucket position per row)
    block_probs: np.ndarray | None = None  # GPK degree distribution

    def bucket_weights(self, D: np.ndarray, a: int, j: int) -> np.ndarray:
        """Estimated mass per nonempty bucket for each prefix diagonal in D."""
        P, nb = D.shape[0], len(self.members)
        per_k = []
        for k, (Wk, pos) in enumerate(self.W[id(self.level_data[a])]):
            R = Wk.shape[0]
            V = (D[:, None, :] * Wk[None, :, :]).reshape(P * R, self.n).T
            norms = self.tns[self.bucket_tn[k]].rep_norms(V, j).reshape(-1, P, R)
            grouped = np.zeros((norms.shape[0], P, nb))
            first = np.r_[0, np.nonzero(np.diff(pos))[0] + 1]
            grouped[:, :, pos[first]] = np.add.reduceat(norms, first, axis=2)
            per_k.append(lower_median(grouped, axis=0))
        return lower_median(np.stack(per_k), axis=0)

    def row_weights(self, cols: np.ndarray, j: int) -> np.ndarray:
        """Estimated mass of each column query (n x r), median across TNs."""
        per = [lower_median(tn.rep_norms(cols, j), axis=0) for tn in self.tns]
        return lower_median(np.stack(per), axis=0)


def _segment_draw(weights: np.ndarray, starts: np.ndarray, seg: np.ndarray, u: np.ndarray):
    """Inverse-CDF draws from contiguous segments of a weight vector.

    Segment g covers weights[starts[g]:starts[g+1]]. Sample k draws from
    segment seg[k] with uniform u[k]. A segment whose weights are all zero
    is treated as uniform and its draws are flagged. Returns the global
    position drawn, its probability within the segment, and the flags.
    """
    n_seg = len(starts)
    ends = np.append(starts[1:], len(weights))
    seg_id = np.repeat(np.arange(n_seg), ends - starts)
    tot = np.add.reduceat(weights, starts)
    dead = ~(tot > 0)
    w = np.where(dead[seg_id], 1.0, weights)
    tot = np.where(dead, (ends - starts).astype(float), tot)
    p = w / tot[seg_id]
    cs = np.cumsum(p)
    base = np.where(starts > 0, cs[np.maximum(starts - 1, 0)], 0.0)
    local = cs - base[seg_id]
    local[ends - 1] = 1.0
    keys = seg_id + local
    pos = np.searchsorted(keys, seg + u, side="right")
    pos = np.clip(pos, starts[seg], ends[seg] - 1)
    for k in np.nonzero(p[pos] == 0)[0]:  # rounding at a zero-width interval
        while p[pos[k]] == 0:
            pos[k] -= 1
    return pos, p[pos], dead[seg]


def _draw(plan: _Plan, U: np.ndarray) -> SampledRows:
    s, q = U.shape[0], plan.q
    if plan.block_probs is None:
        block = np.full(s, q, dtype=np.int64)
        prob = np.ones(s)
    else:
        bp = plan.block_probs
        block, pb, _ = _segment_draw(bp, np.array([0]), np.zeros(s, dtype=np.int64), U[:, 0])
        block = block.astype(np.int64)
        prob = pb.copy()
    idx = np.full((s, max(q, 1)), -1, dtype=np.int64)
    flagged = np.zeros(s, dtype=bool)
    nb = len(plan.members)
    sizes = np.array([len(m) for m in plan.members])
    for a in range(q):
        act = np.nonzero(block > a)[0]
        if not act.size:
            break
        keys = np.column_stack([block[act], idx[act, :a]])
        ukeys, inv = np.unique(keys, axis=0, return_inverse=True)
        inv = inv.ravel()
        D = np.tile(plan.v, (len(ukeys), 1))
        for c in range(a):
            D *= dense_rows(plan.level_data[c], ukeys[:, 1 + c])
        jq = a + 1 + q - ukeys[:, 0]
        p_bucket = np.zeros((len(ukeys), nb))
        for j in np.unique(jq):
            sel = np.nonzero(jq == j)[0]
            p_bucket[sel] = plan.bucket_weights(D[sel], a, int(j))
        pos, pt, fl = _segment_draw(p_bucket.ravel(), np.arange(len(ukeys)) * nb, inv, U[act, 1 + 2 * a])
        chosen = pos - inv * nb
        prob[act] *= pt
        flagged[act] |= fl
        # within-bucket distributions for each distinct (prefix, bucket)
        pairs, pinv = np.unique(np.column_stack([inv, chosen]), axis=0, return_inverse=True)
        pinv = pinv.ravel()
        lens = sizes[pairs[:, 1]]
        starts = np.concatenate([[0], np.cumsum(lens)[:-1]])
        rows = np.concatenate([plan.members[t] for t in pairs[:, 1]])
        owner = np.repeat(pairs[:, 0], lens)
        cols = (dense_rows(plan.level_data[a], rows) * D[owner]).T
        wts = np.empty(len(rows))
        jcol = jq[owner]
        for j in np.unique(jcol):
            sel = np.nonzero(jcol == j)[0]
            wts[sel] = plan.row_weights(cols[:, sel], int(j))
        pos, pi, fl = _segment_draw(wts, starts, pinv, U[act, 2 + 2 * a])
        idx[act, a] = rows[pos]
        prob[act] *= pi
        flagged[act] |= fl
    weight = 1 / np.sqrt(s * prob)
    return SampledRows(block, idx, weight, prob, flagged)


def _uniforms(s: int, q: int, rng: RngStream) -> np.ndarray:
    return rng.child(0).generator().random((s, 2 * max(q, 1) + 1))


def _bucket_sketches(datasets, buckets: BucketHash, n_rows: int, reps: int, rng: RngStream):
    """Per repetition k, the stacked nonzero rows of G_r^k X_{h^-1(r)}.

    Each bucket gets an independent CountSketch into n_rows rows; rows of
    the output that receive no input are dropped since they add nothing
    to any norm.
    """
    ids, members = buckets.nonempty()
    d = len(buckets.h)
    out = {}
    for k in range(reps):
        g = rng.child(k).generator()
        target = g.integers(0, n_rows, size=d)
        sign = g.integers(0, 2, size=d) * 2.0 - 1.0
        slot = buckets.h.astype(np.int64) * n_rows + target
        used, row_of = np.unique(slot, return_inverse=True)
        pos = np.searchsorted(ids, used // n_rows)
        for X in datasets:
            Ws = out.setdefault(id(X), [])
            Wk = np.zeros((len(used), X.shape[1]))
            Xd = X.toarray() if hasattr(X, "toarray") else X
            np.add.at(Wk, row_of, sign[:, None] * Xd)
            Ws.append((Wk, pos))
    return members, out


def _check_common(B, lam, s, n):
    if s < 1:
        raise ContractError("need s >= 1")
    if not lam > 0:
        raise ContractError("lambda must be positive")
    if B is None:
        B = np.zeros((1, n))
    if np.asarray(B.shape)[-1] != n:
        raise ContractError("B must have one column per data point")
    return B


def _unique_datasets(datasets):
    seen = {}
    for X in datasets:
        seen.setdefault(id(X), X)
    return list(seen.values())


def row_sampler_tensor(Xs, B, lam: float, s: int, cfg: RowSamplerConfig | None = None,
                       rng: RngStream | int = 0) -> SampledRows:
    """Row norm sampler for (X^(1) (x) ... (x) X^(q)) (B^T B + lam I)^{-1/2}."""
    cfg = cfg or RowSamplerConfig()
    rng = rng if isinstance(rng, RngStream) else RngStream(int(rng))
    Xs = [as_data_matrix(X) for X in Xs]
    if not Xs or len({X.shape for X in Xs}) != 1:
        raise ContractError("datasets must all have the same shape d x n")
    q = len(Xs)
    d, n = Xs[0].shape
    B = _check_common(B, lam, s, n)
    if TensorProduct(tuple(Xs)).frobenius_sq <= 0:
        raise ContractError("Phi is identically zero")
    basis = reg_inv_sqrt(B, lam)
    d_jl = max(cfg.jl_min, math.ceil(cfg.c1 * q * _log2n(n)))
    M = basis.apply_right(gaussian_jl_apply(GaussianJlSpec(d_jl, n, rng.child(1)), np.eye(n)))
    tn = tnds_build(Xs + [M], cfg.tn_eps or 1 / (20 * q), cfg.tn_config(n), rng.child(2))
    buckets = BucketHash.build(d, math.ceil(q * q * s), rng.child(3))
    reps = cfg.repetitions(cfg.c3, n)
    members, W = _bucket_sketches(_unique_datasets(Xs), buckets, math.ceil(cfg.c2 * q * q), reps, rng.child(4))
    plan = _Plan(q, n, Xs, np.ones(n), [tn], [0] * reps, members, W)
    return _draw(plan, _uniforms(s, q, rng.child(5)))


def _selftensor_tns(X, q, M, kappa, cfg, rng):
    d, n = X.shape
    fams = cfg.repetitions(cfg.c1, n)
    m2 = math.ceil(cfg.c2 * (q**3 + q**2 * kappa) * _log2n(n))
    if m2 > next_pow2(d):
        log.warning("SRHT rows %d exceed padded dimension %d; clamping", m2, next_pow2(d))
        m2 = next_pow2(d)
    eps = cfg.tn_eps or 1 / (40 * max(q, 1))
    Xd = X.toarray() if hasattr(X, "toarray") else X
    tns = []
    for k in range(fams):
        if q:
            fam = shared_sign_family_build(q, d, m2, rng.child(k, 0))
            ys = shared_sign_family_apply_all(fam, Xd)
        else:
            ys = []
        tns.append(tnds_build(ys + [M], eps, cfg.tn_config(n), rng.child(k, 1)))
    return tns


def row_sampler_selftensor(X, q: int, B, lam: float, s: int, cfg: RowSamplerConfig | None = None,
                           rng: RngStream | int = 0) -> SampledRows:
    """Row norm sampler for X^{(x) q} (B^T B + lam I)^{-1/2}."""
    cfg = cfg or RowSamplerConfig()
    rng = rng if isinstance(rng, RngStream) else RngStream(int(rng))
    X = as_data_matrix(X)
    if q < 1:
        raise ContractError("degree must be at least 1")
    d, n = X.shape
    B = _check_common(B, lam, s, n)
    if SelfTensor(X, q).frobenius_sq <= 0:
        raise ContractError("Phi is identically zero")
    basis = reg_inv_sqrt(B, lam)
    d_jl = max(cfg.jl_min, math.ceil(cfg.c0 * q * q * _log2n(n)))
    M = basis.apply_right(gaussian_jl_apply(GaussianJlSpec(d_jl, n, rng.child(1)), np.eye(n)))
    tns = _selftensor_tns(X, q, M, basis.kappa, cfg, rng.child(2))
    buckets = BucketHash.build(d, math.ceil(q**3 * s), rng.child(3))
    members, W = _bucket_sketches([X], buckets, math.ceil(cfg.c3 * q * q), len(tns), rng.child(4))
    plan = _Plan(q, n, [X] * q, np.ones(n), tns, list(range(len(tns))), members, W)
    return _draw(plan, _uniforms(s, q, rng.child(5)))


def gpk_block_distribution(tns, alpha, v) -> np.ndarray:
    q = len(alpha) - 1
    f = np.array([alpha[j] ** 2 * float(lower_median(np.array([tn.query(v, q - j) for tn in tns])))
                  for j in range(q + 1)])
    tot = f.sum()
    if not tot > 0:
        raise ContractError("all GPK blocks have zero estimated mass")
    return f / tot


def row_sampler_gpk(X, v, alpha, B, lam: float, s: int, cfg: RowSamplerConfig | None = None,
                    rng: RngStream | int = 0) -> SampledRows:
    """Row norm sampler for the GPK feature matrix times (B^T B + lam I)^{-1/2}."""
    cfg = cfg or RowSamplerConfig()
    rng = rng if isinstance(rng, RngStream) else RngStream(int(rng))
    desc = Gpk(X, v, alpha)
    X, v, alpha = desc.X, desc.v, desc.alpha
    q = desc.q
    d, n = X.shape
    B = _check_common(B, lam, s, n)
    if desc.frobenius_sq <= 0:
        raise ContractError("Phi is identically zero")
    basis = reg_inv_sqrt(B, lam)
    d_jl = max(cfg.jl_min, math.ceil(cfg.c0 * max(q, 1) ** 2 * _log2n(n)))
    M = basis.apply_right(gaussian_jl_apply(GaussianJlSpec(d_jl, n, rng.child(1)), np.eye(n)))
    tns = _selftensor_tns(X, q, M, basis.kappa, cfg, rng.child(2))
    f = gpk_block_distribution(tns, alpha, v)
    buckets = BucketHash.build(d, math.ceil(max(q, 1) ** 3 * s), rng.child(3))
    members, W = _bucket_sketches([X], buckets, math.ceil(cfg.c3 * max(q, 1) ** 2), len(tns), rng.child(4))
    plan = _Plan(q, n, [X] * max(q, 1), v, tns, list(range(len(tns))), members, W, block_probs=f)
    return _draw(plan, _uniforms(s, q, rng.child(5)))


def row_sampler(desc, B, lam: float, s: int, cfg: RowSamplerConfig | None = None,
                rng: RngStream | int = 0) -> SampledRows:
    """Dispatch on the descriptor variant."""
    if isinstance(desc, TensorProduct):
        return row_sampler_tensor(list(desc.datasets), B, lam, s, cfg, rng)
    if isinstance(desc, SelfTensor):
        return row_sampler_selftensor(desc.X, desc.q, B, lam, s, cfg, rng)
    if isinstance(desc, Gpk):
        return row_sampler_gpk(desc.X, desc.v, desc.alpha, B, lam, s, cfg, rng)
    raise ContractError(f"unknown descriptor {type(desc).__name__}")


def materialize_sampled_rows(rows: SampledRows, desc) -> np.ndarray:
    """Pi Phi, row by row, as Hadamard products of indexed dataset rows."""
    s, n = rows.s, desc.n
    out = np.ones((s, n))
    if isinstance(desc, Gpk):
        if rows.block.max(initial=0) > desc.q or rows.block.min(initial=0) < 0:
            raise ContractError("block index out of range")
        out *= desc.v[None, :] * desc.alpha[rows.block][:, None]
    elif np.any(rows.block != desc.q):
        raise ContractError("block must equal the tensor degree")
    for a in range(int(rows.block.max(initial=0))):
        X = desc.level_data(a)
        sel = np.nonzero(rows.block > a)[0]
        ids = rows.idx[sel, a]
        if np.any(ids < 0) or np.any(ids >= X.shape[0]):
            raise ContractError("row index out of range")
        out[sel] *= dense_rows(X, ids)
    return out * rows.weight[:, None]
