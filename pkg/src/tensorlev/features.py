"""Implicit descriptions of tensor-product feature matrices.

Phi is never formed here. A descriptor knows its datasets, its closed-form
squared Frobenius norm and how to produce the Hadamard product of indexed
dataset rows, which is all the samplers need.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import ContractError


def as_data_matrix(X):
    """Dense float array or CSR sparse matrix with data points as columns."""
    if sp.issparse(X):
        X = sp.csr_matrix(X, dtype=float)
        if not np.all(np.isfinite(X.data)):
            raise ContractError("dataset has non-finite entries")
        return X
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ContractError("dataset must be a 2-D array (d x n)")
    if not np.all(np.isfinite(X)):
        raise ContractError("dataset has non-finite entries")
    return X


def column_sq_norms(X) -> np.ndarray:
    if sp.issparse(X):
        return np.asarray(X.multiply(X).sum(axis=0)).ravel()
    return np.einsum("ij,ij->j", X, X)


def dense_rows(X, idx) -> np.ndarray:
    """Rows X[idx, :] as a dense array."""
    if sp.issparse(X):
        return X[np.asarray(idx)].toarray()
    return X[np.asarray(idx)]


@dataclass(frozen=True, eq=False)
class TensorProduct:
    """Phi = X^(1) (x) ... (x) X^(q), columnwise."""

    datasets: tuple

    def __post_init__(self):
        ds = tuple(as_data_matrix(X) for X in self.datasets)
        if not ds:
            raise ContractError("need at least one dataset")
        if len({X.shape[1] for X in ds}) != 1:
            raise ContractError("datasets must share one column count")
        object.__setattr__(self, "datasets", ds)

    @property
    def q(self) -> int:
        return len(self.datasets)

    @property
    def n(self) -> int:
        return self.datasets[0].shape[1]

    def level_data(self, a: int):
        return self.datasets[a]

    @cached_property
    def frobenius_sq(self) -> float:
        prod = np.ones(self.n)
        for X in self.datasets:
            prod *= column_sq_norms(X)
        return float(prod.sum())


@dataclass(frozen=True, eq=False)
class SelfTensor:
    """Phi = X^{(x) q}."""

    X: object
    q: int

    def __post_init__(self):
        object.__setattr__(self, "X", as_data_matrix(self.X))
        if self.q < 1:
            raise ContractError("degree must be at least 1")

    @property
    def n(self) -> int:
        return self.X.shape[1]

    @property
    def datasets(self) -> tuple:
        return (self.X,) * self.q

    def level_data(self, a: int):
        return self.X

    @cached_property
    def frobenius_sq(self) -> float:
        return float(np.sum(column_sq_norms(self.X) ** self.q))


@dataclass(frozen=True, eq=False)
class Gpk:
    """Phi = direct sum over j of alpha_j X^{(x) j} diag(v)."""

    X: object
    v: np.ndarray
    alpha: np.ndarray = field(default=None)

    def __post_init__(self):
        X = as_data_matrix(self.X)
        v = np.asarray(self.v, dtype=float).ravel()
        alpha = np.asarray(self.alpha, dtype=float).ravel()
        if v.shape[0] != X.shape[1]:
            raise ContractError("v must have one entry per column")
        if alpha.size == 0 or np.any(alpha < 0) or not np.any(alpha > 0):
            raise ContractError("alpha must be non-negative with a positive entry")
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(alpha))):
            raise ContractError("alpha and v must be finite")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "alpha", alpha)

    @property
    def q(self) -> int:
        return len(self.alpha) - 1

    @property
    def n(self) -> int:
        return self.X.shape[1]

    def level_data(self, a: int):
        return self.X

    @cached_property
    def frobenius_sq(self) -> float:
        r = column_sq_norms(self.X)
        per_col = sum(a**2 * r**j for j, a in enumerate(self.alpha))
        return float(np.sum(self.v**2 * per_col))


FeatureDescriptor = TensorProduct | SelfTensor | Gpk


def frobenius_sq(desc: FeatureDescriptor) -> float:
    return desc.frobenius_sq
