"""Seeded synthetic datasets for experiments and tests."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .rng import DATA, RngStream


def _gen(seed: int, *ids: int) -> np.random.Generator:
    return RngStream(seed).child(DATA, *ids).generator()


def gaussian_cloud(d: int, n: int, seed: int = 0, radius: float | None = None) -> np.ndarray:
    """Standard normal points as columns, optionally rescaled to max norm radius."""
    X = _gen(seed, 0).standard_normal((d, n))
    if radius is not None:
        X *= radius / np.linalg.norm(X, axis=0).max()
    return X


def unit_columns(d: int, n: int, seed: int = 0) -> np.ndarray:
    X = gaussian_cloud(d, n, seed)
    return X / np.linalg.norm(X, axis=0)


def regression_target(X: np.ndarray, seed: int = 0, noise: float = 0.3) -> np.ndarray:
    """y = sin(3 w.x / sqrt(d)) + noise, with w and the noise seeded."""
    g = _gen(seed, 1)
    d, n = X.shape
    w = g.standard_normal(d)
    return np.sin(3 * (w @ X) / np.sqrt(d)) + noise * g.standard_normal(n)


def class_labels(X: np.ndarray, n_classes: int = 3, seed: int = 0) -> np.ndarray:
    """Labels from the nearest of n_classes random centers."""
    C = _gen(seed, 2).standard_normal((X.shape[0], n_classes))
    return np.argmin(((X[:, :, None] - C[:, None, :]) ** 2).sum(axis=0), axis=1).astype(float)


def sparse_dataset(d: int, n: int, nnz: int, seed: int = 0) -> sp.csc_matrix:
    """d x n with nnz distinct uniformly placed normal entries."""
    g = _gen(seed, 3)
    nnz = min(int(nnz), d * n)
    flat = g.choice(d * n, size=nnz, replace=False)
    return sp.csc_matrix((g.standard_normal(nnz), (flat % d, flat // d)), shape=(d, n))


def regression_task(d: int, n_train: int, n_test: int, seed: int = 0, noise: float = 0.3,
                    radius: float = 1.0):
    """Train/test split of one cloud with max column norm radius."""
    X = gaussian_cloud(d, n_train + n_test, seed, radius)
    y = regression_target(X, seed, noise)
    return X[:, :n_train], y[:n_train], X[:, n_train:], y[n_train:]
