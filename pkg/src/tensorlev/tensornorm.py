"""Frobenius-norm oracle for prefix-replaced tensor products.

For factors X^(1..k) (each with n columns) the structure answers

    query(V, j) ~ || (X^(j+1) (x) ... (x) X^(k)) V ||_F^2

where the first j factors have been swapped for the all-e_1 matrix. Each
of T repetitions stores Q_i S_i applied to the k+1 prefix-replaced
products; a query is the lower median over repetitions.
"""
from __future__ import annotations

import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ContractError, NumericalError
from .rng import RngStream
from .sketches import next_pow2, polysketch_build, polysketch_prefix_sweep, srht_apply, srht_build

MAGIC = b"TNDS"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class TensorNormConfig:
    """Sizing knobs. None means use the default rule."""

    c_ps: float = 16.0
    reps: int | None = None
    c_srht: float = 40.0
    srht_cap: int = 4096
    sketch_cap: int | None = None
    srht_dim: int | None = None
    threads: int = 1

    def sketch_dim(self, k: int, eps: float) -> int:
        m = math.ceil(self.c_ps * k / eps**2)
        return max(1, min(m, self.sketch_cap) if self.sketch_cap else m)

    def outer_dim(self, m: int, eps: float) -> int:
        if self.srht_dim is not None:
            mp = int(self.srht_dim)
        else:
            mp = math.ceil(self.c_srht * max(1.0, math.log2(1.0 / eps)) / eps**2)
        return max(1, min(mp, self.srht_cap, next_pow2(m)))

    def repetitions(self, n: int) -> int:
        if self.reps is not None:
            return max(1, int(self.reps))
        return max(5, math.ceil(2 * math.log2(max(n, 2))))


def lower_median(a: np.ndarray, axis: int = 0) -> np.ndarray:
    """Lower median along an axis (for even counts, the smaller middle value)."""
    a = np.asarray(a)
    t = a.shape[axis]
    return np.partition(a, (t - 1) // 2, axis=axis).take((t - 1) // 2, axis=axis)


@dataclass(frozen=True, eq=False)
class TensorNormDs:
    dims: tuple[int, ...]
    eps: float
    m: int
    P: np.ndarray  # shape (T, k+1, m', n)

    @property
    def k(self) -> int:
        return len(self.dims)

    @property
    def reps(self) -> int:
        return self.P.shape[0]

    @property
    def outer_dim(self) -> int:
        return self.P.shape[2]

    @property
    def n(self) -> int:
        return self.P.shape[3]

    @property
    def nbytes(self) -> int:
        return self.P.nbytes

    def rep_norms(self, V, j: int, chunk: int = 2048) -> np.ndarray:
        """Squared column norms of P_{i,j} V, shape (T, r)."""
        if not 0 <= j <= self.k:
            raise ContractError(f"prefix index {j} outside 0..{self.k}")
        if V.ndim == 1:
            V = V[:, None]
        if V.shape[0] != self.n:
            raise ContractError(f"query has {V.shape[0]} rows, expected {self.n}")
        T, mp = self.reps, self.outer_dim
        A = self.P[:, j].reshape(T * mp, self.n)
        r = V.shape[1]
        out = np.empty((T, r))
        for c0 in range(0, r, chunk):
            blk = V[:, c0:c0 + chunk]
            if sp.issparse(blk):
                prod = np.asarray((blk.T @ A.T).T)
            else:
                prod = A @ blk
            prod = prod.reshape(T, mp, -1)
            out[:, c0:c0 + chunk] = np.einsum("tmr,tmr->tr", prod, prod)
        return out

    def query(self, V, j: int) -> float:
        return float(lower_median(self.rep_norms(V, j).sum(axis=1)))

    # -------------------------------------------------------------- storage

    def to_bytes(self) -> bytes:
        T, k1, mp, n = self.P.shape
        head = MAGIC + struct.pack("<HIIIIQd", FORMAT_VERSION, self.k, T, self.m, mp, n, self.eps)
        head += struct.pack(f"<{self.k}Q", *self.dims)
        return head + np.ascontiguousarray(self.P, dtype="<f8").tobytes()

    @classmethod
    def from_bytes(cls, buf: bytes) -> "TensorNormDs":
        if buf[:4] != MAGIC:
            raise ContractError("not a serialized TensorNormDs")
        fmt = "<HIIIIQd"
        off = 4 + struct.calcsize(fmt)
        ver, k, T, m, mp, n, eps = struct.unpack(fmt, buf[4:off])
        if ver != FORMAT_VERSION:
            raise ContractError(f"unsupported TensorNormDs format version {ver}")
        dims = struct.unpack(f"<{k}Q", buf[off:off + 8 * k])
        off += 8 * k
        P = np.frombuffer(buf, dtype="<f8", offset=off, count=T * (k + 1) * mp * n)
        return cls(tuple(int(x) for x in dims), float(eps), int(m), P.reshape(T, k + 1, mp, n).astype(float))

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "TensorNormDs":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def _one_rep(inputs, dims, m, mp, rng):
    tree = polysketch_build(dims, m, rng.child(0))
    Q = srht_build(m, mp, rng.child(1))
    outs = polysketch_prefix_sweep(tree, inputs)
    n = outs[0].shape[1]
    stacked = srht_apply(Q, np.hstack(outs))
    return stacked.reshape(mp, len(outs), n).transpose(1, 0, 2)


def tnds_build(inputs, eps: float, cfg: TensorNormConfig | None, rng: RngStream) -> TensorNormDs:
    cfg = cfg or TensorNormConfig()
    if not inputs:
        raise ContractError("TensorNormDs needs at least one factor")
    if not 0 < eps < 1:
        raise ContractError("eps must lie in (0, 1)")
    n = inputs[0].shape[1]
    if any(X.ndim != 2 or X.shape[1] != n for X in inputs):
        raise ContractError("all factors must share one column count")
    dims = tuple(int(X.shape[0]) for X in inputs)
    m = cfg.sketch_dim(len(dims), eps)
    mp = cfg.outer_dim(m, eps)
    T = cfg.repetitions(n)
    work = lambda i: _one_rep(inputs, dims, m, mp, rng.child(i))  # noqa: E731
    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            reps = list(pool.map(work, range(T)))
    else:
        reps = [work(i) for i in range(T)]
    P = np.stack(reps)
    if not np.all(np.isfinite(P)):
        raise NumericalError("non-finite values in TensorNormDs build")
    return TensorNormDs(dims, float(eps), m, P)


def tnds_query(ds: TensorNormDs, V, j: int) -> float:
    return ds.query(V, j)
