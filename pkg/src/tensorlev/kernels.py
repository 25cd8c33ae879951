"""Generalized polynomial kernels and their Gaussian / NTK instances.

A GPK is K = diag(v) (sum_j alpha_j^2 (X^T X)^{o j}) diag(v), with feature
matrix the direct sum of alpha_j X^{(x) j} diag(v). The Gaussian kernel
and the two-layer ReLU NTK both reduce to this form after truncating
their power series.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import ContractError
from .features import Gpk, as_data_matrix, column_sq_norms

NTK_EXACT_TAIL_MAX_N = 500
NTK_MAX_DEGREE = 200_000


@dataclass(frozen=True, eq=False)
class GpkSpec:
    q: int
    alpha: np.ndarray
    v: np.ndarray
    X: np.ndarray
    normalized: bool = False
    kind: str = "custom"

    def __post_init__(self):
        if len(self.alpha) != self.q + 1:
            raise ContractError("alpha must have q+1 entries")
        if np.any(np.asarray(self.alpha) < 0) or not np.all(np.isfinite(self.alpha)):
            raise ContractError("alpha must be finite and non-negative")

    def descriptor(self) -> Gpk:
        return Gpk(self.X, self.v, self.alpha)

    def to_json(self, include_data: bool = False) -> str:
        doc = {
            "kind": self.kind,
            "q": int(self.q),
            "alpha": [float(a) for a in self.alpha],
            "v": [float(x) for x in self.v],
            "normalized": bool(self.normalized),
        }
        if include_data:
            doc["X"] = np.asarray(self.X).tolist()
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str, X=None) -> "GpkSpec":
        doc = json.loads(text)
        if X is None:
            if "X" not in doc:
                raise ContractError("document has no dataset; pass X")
            X = np.asarray(doc["X"], dtype=float)
        return cls(doc["q"], np.asarray(doc["alpha"]), np.asarray(doc["v"]), X,
                   doc["normalized"], doc.get("kind", "custom"))


def hadamard_series(G: np.ndarray, coef) -> np.ndarray:
    """sum_j coef[j] * G^{o j} by Horner's rule, with G^{o 0} = all ones."""
    coef = np.asarray(coef, dtype=float)
    acc = np.full(G.shape, coef[-1])
    for c in coef[-2::-1]:
        acc = acc * G + c
    return acc


def gpk_kernel_exact(spec: GpkSpec) -> np.ndarray:
    X = as_data_matrix(spec.X)
    G = X.T @ X
    G = np.asarray(G.toarray() if hasattr(G, "toarray") else G)
    K = hadamard_series(G, np.asarray(spec.alpha) ** 2)
    v = np.asarray(spec.v)
    return v[:, None] * K * v[None, :]


# ---------------------------------------------------------------- Gaussian


def exp_tails(r: float, upto: int) -> np.ndarray:
    """tails[q] = sum_{l > q} r^l / l!  for q = 0..upto."""
    top = max(upto, int(2 * r) + 60)
    while True:
        ls = np.arange(top + 1)
        logt = ls * math.log(r) - gammaln(ls + 1) if r > 0 else np.where(ls == 0, 0.0, -np.inf)
        terms = np.exp(logt)
        if terms[-1] < 1e-300 or terms[-1] < 1e-18 * terms.max():
            break
        top *= 2
    tails = np.cumsum(terms[::-1])[::-1]  # tails[l] = sum_{k >= l}
    return np.append(tails[1:], 0.0)[: upto + 1]


def gaussian_degree(r: float, target: float) -> int:
    if target <= 0:
        raise ContractError("truncation target must be positive")
    upto = 64
    while True:
        tails = exp_tails(r, upto)
        ok = np.nonzero(tails <= target)[0]
        if ok.size:
            return max(1, int(ok[0]))
        upto *= 2


def gaussian_gpk_spec(X, eps: float, lam: float) -> GpkSpec:
    if eps <= 0 or lam <= 0:
        raise ContractError("eps and lambda must be positive")
    X = np.asarray(as_data_matrix(X).todense() if hasattr(X, "todense") else X, dtype=float)
    n = X.shape[1]
    sq = column_sq_norms(X)
    q = gaussian_degree(float(sq.max()), eps * lam / (4 * n))
    alpha = np.exp(-0.5 * gammaln(np.arange(q + 1) + 1))
    return GpkSpec(q, alpha, np.exp(-sq / 2), X, normalized=False, kind="gaussian")


def gaussian_kernel_exact(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    sq = column_sq_norms(X)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2 * X.T @ X, 0.0)
    return np.exp(-d2 / 2)


# ---------------------------------------------------------------- NTK


def k_ntk(beta) -> np.ndarray:
    b = np.clip(np.asarray(beta, dtype=float), -1.0, 1.0)
    return (np.sqrt(1 - b * b) + 2 * b * (np.pi - np.arccos(b))) / np.pi


def ntk_taylor_coeffs(upto: int) -> np.ndarray:
    """c_0..c_upto of the power series of k_ntk."""
    j = np.arange(upto + 1, dtype=float)
    c = np.zeros(upto + 1)
    c[0] = 1 / np.pi
    if upto >= 1:
        c[1] = 1.0
    even = np.arange(2, upto + 1, 2)
    if even.size:
        je = j[even]
        logc = (np.log(je + 1) + gammaln(je - 1) - (je - 2) * np.log(2.0)
                - 2 * gammaln(je / 2) - np.log(je - 1) - np.log(je) - np.log(np.pi))
        c[even] = np.exp(logc)
    return c


def ntk_taylor_coeff(j: int) -> float:
    if j < 0:
        raise ContractError("coefficient index must be non-negative")
    return float(ntk_taylor_coeffs(j)[j])


def ntk_kernel_exact(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    nrm = np.sqrt(column_sq_norms(X))
    if np.any(nrm == 0):
        raise ContractError("NTK is undefined for a zero column")
    Xh = X / nrm
    return nrm[:, None] * nrm[None, :] * k_ntk(Xh.T @ Xh)


def _ntk_degree_exact(G: np.ndarray, v: np.ndarray, target: float) -> int:
    """Smallest degree whose truncation error in Frobenius norm meets target."""
    vv = v[:, None] * v[None, :]
    resid = vv * k_ntk(G)
    power = np.ones_like(G)
    c = ntk_taylor_coeffs(NTK_MAX_DEGREE)
    for j in range(NTK_MAX_DEGREE + 1):
        resid -= c[j] * vv * power
        if np.linalg.norm(resid) <= target:
            return j
        power *= G
    raise ContractError("NTK truncation degree exceeds the supported maximum")


def _ntk_degree_bound(total_sq: float, target: float) -> int:
    c = ntk_taylor_coeffs(NTK_MAX_DEGREE)
    tails = 2.0 - np.cumsum(c)
    ok = np.nonzero(total_sq * tails <= target)[0]
    if not ok.size:
        raise ContractError("NTK truncation degree exceeds the supported maximum")
    return int(ok[0])


def ntk_gpk_spec(X, eps: float, lam: float) -> GpkSpec:
    if eps <= 0 or lam <= 0:
        raise ContractError("eps and lambda must be positive")
    X = np.asarray(X, dtype=float)
    nrm = np.sqrt(column_sq_norms(X))
    if np.any(nrm == 0):
        raise ContractError("NTK needs nonzero columns")
    Xh = X / nrm
    target = eps * lam / 4
    if X.shape[1] <= NTK_EXACT_TAIL_MAX_N:
        q = _ntk_degree_exact(np.clip(Xh.T @ Xh, -1, 1), nrm, target)
    else:
        q = _ntk_degree_bound(float(np.sum(nrm**2)), target)
    q = max(q, 1)
    alpha = np.sqrt(ntk_taylor_coeffs(q))
    return GpkSpec(q, alpha, nrm, Xh, normalized=True, kind="ntk")


# ---------------------------------------------------------------- misc


def polynomial_kernel_exact(X, q: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return (X.T @ X) ** q


def statistical_dimension(K: np.ndarray, lam: float) -> float:
    K = np.asarray(K, dtype=float)
    if lam <= 0:
        raise ContractError("lambda must be positive")
    mu = np.clip(np.linalg.eigvalsh((K + K.T) / 2), 0, None)
    return float(np.sum(mu / (mu + lam)))


def lambda_for_statistical_dimension(K: np.ndarray, target: float) -> float:
    """The lam with s_lam(K) = target, found by root bracketing in log lam."""
    from scipy.optimize import brentq

    mu = np.clip(np.linalg.eigvalsh((np.asarray(K, dtype=float) + np.asarray(K).T) / 2), 0, None)
    rank = int(np.sum(mu > mu.max() * 1e-12))
    if not 0 < target < rank:
        raise ContractError(f"target must lie in (0, {rank})")
    f = lambda t: float(np.sum(mu / (mu + math.exp(t)))) - target  # noqa: E731
    lo, hi = math.log(mu.max()) - 40, math.log(mu.max()) + 40
    return math.exp(brentq(f, lo, hi, xtol=1e-12))
