"""Brute-force ground truth for small instances.

Everything here forms Phi densely and uses plain eigendecompositions. It
is deliberately independent of the sketching code so that it can check
it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ContractError
from .features import FeatureDescriptor, Gpk, SelfTensor, TensorProduct

DEFAULT_CAP = 2**22


@dataclass(frozen=True, eq=False)
class MaterializedPhi:
    """Dense Phi plus the codec between flat rows and (block, multi-index).

    Within a block, rows are row-major over (i_1, ..., i_b) with i_1 most
    significant. Blocks are stacked by degree for GPK features; other
    descriptors have a single block of degree q.
    """

    matrix: np.ndarray
    dims: tuple[int, ...]  # per-level dimension of the widest block
    blocks: tuple[int, ...]  # degrees present, in order
    offsets: tuple[int, ...]

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    def encode(self, block: int, idx) -> int:
        pos = self.blocks.index(block)
        idx = tuple(int(i) for i in idx)
        if len(idx) != block:
            raise ContractError("multi-index length must equal the block degree")
        flat = 0
        for a, i in enumerate(idx):
            if not 0 <= i < self.dims[a]:
                raise ContractError("index out of range")
            flat = flat * self.dims[a] + i
        return self.offsets[pos] + flat

    def decode(self, row: int) -> tuple[int, tuple[int, ...]]:
        if not 0 <= row < self.n_rows:
            raise ContractError("row out of range")
        pos = int(np.searchsorted(self.offsets, row, side="right")) - 1
        b = self.blocks[pos]
        flat = row - self.offsets[pos]
        idx = []
        for a in reversed(range(b)):
            flat, i = divmod(flat, self.dims[a])
            idx.append(i)
        return b, tuple(reversed(idx))


def _dense(X) -> np.ndarray:
    return X.toarray() if sp.issparse(X) else np.asarray(X, dtype=float)


def _khatri_rao(mats, n: int) -> np.ndarray:
    out = np.ones((1, n))
    for A in mats:
        out = (out[:, None, :] * A[None, :, :]).reshape(-1, n)
    return out


def materialize_phi(desc: FeatureDescriptor, cap: int = DEFAULT_CAP) -> MaterializedPhi:
    n = desc.n
    if isinstance(desc, Gpk):
        X = _dense(desc.X)
        d = X.shape[0]
        sizes = [d**b for b in range(desc.q + 1)]
        if sum(sizes) * n > cap:
            raise ContractError(f"materialized Phi would exceed {cap} entries")
        blocks = [desc.alpha[b] * _khatri_rao([X] * b, n) * desc.v for b in range(desc.q + 1)]
        offsets = tuple(int(x) for x in np.concatenate([[0], np.cumsum(sizes)[:-1]]))
        return MaterializedPhi(np.vstack(blocks), (d,) * desc.q, tuple(range(desc.q + 1)), offsets)
    mats = [_dense(X) for X in desc.datasets]
    dims = tuple(A.shape[0] for A in mats)
    if int(np.prod(dims, dtype=float)) * n > cap:
        raise ContractError(f"materialized Phi would exceed {cap} entries")
    return MaterializedPhi(_khatri_rao(mats, n), dims, (len(mats),), (0,))


def _matrix(phi) -> np.ndarray:
    return phi.matrix if isinstance(phi, MaterializedPhi) else np.asarray(phi, dtype=float)


def ridge_inv_sqrt(B, lam: float, n: int) -> np.ndarray:
    """(B^T B + lam I)^{-1/2} by a dense symmetric eigendecomposition."""
    if lam <= 0:
        raise ContractError("lambda must be positive")
    B = np.zeros((1, n)) if B is None else _dense(B)
    w, U = np.linalg.eigh(B.T @ B + lam * np.eye(n))
    return (U / np.sqrt(w)) @ U.T


def exact_ridge_leverage_scores(phi, lam: float) -> np.ndarray:
    P = _matrix(phi)
    Y = P @ ridge_inv_sqrt(P, lam, P.shape[1])
    return np.einsum("ij,ij->i", Y, Y)


def exact_row_norm_distribution(phi, B, lam: float) -> np.ndarray:
    P = _matrix(phi)
    Y = P @ ridge_inv_sqrt(B, lam, P.shape[1])
    w = np.einsum("ij,ij->i", Y, Y)
    tot = w.sum()
    if not tot > 0:
        raise ContractError("all rows are zero")
    return w / tot


def categorical_sample(p: np.ndarray, size: int, rng: np.random.Generator) -> np.ndarray:
    """Direct i.i.d. draws from a probability vector."""
    return rng.choice(len(p), size=size, p=p)


def tv_distance(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ContractError("length mismatch")
    if abs(p.sum() - 1) > 1e-9 or abs(q.sum() - 1) > 1e-9:
        raise ContractError("inputs must be normalized")
    return float(0.5 * np.abs(p - q).sum())


def spectral_check(K: np.ndarray, Z, lam: float, eps: float) -> tuple[bool, float]:
    """Does Z^T Z + lam I sit within the (1 +- eps) sandwich of K + lam I?

    max_dev is the largest multiplicative deviation from the identity of
    the whitened matrix, max(mu_max, 1/mu_min) - 1.
    """
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1] or not np.allclose(K, K.T, rtol=1e-9, atol=1e-12 * max(1.0, np.abs(K).max())):
        raise ContractError("K must be symmetric")
    if lam <= 0:
        raise ContractError("lambda must be positive")
    n = K.shape[0]
    Z = _dense(Z)
    if Z.shape[1] != n:
        raise ContractError("Z must have one column per data point")
    w, U = np.linalg.eigh((K + K.T) / 2 + lam * np.eye(n))
    if np.any(w <= 0):
        raise ContractError("K + lam I is not positive definite")
    R = (U / np.sqrt(w)) @ U.T
    Wm = R @ (Z.T @ Z + lam * np.eye(n)) @ R
    mu = np.linalg.eigvalsh((Wm + Wm.T) / 2)
    ok = bool(mu.min() >= 1 / (1 + eps) - 1e-9 and mu.max() <= 1 / (1 - eps) + 1e-9)
    return ok, float(max(mu.max(), 1 / mu.min()) - 1)
