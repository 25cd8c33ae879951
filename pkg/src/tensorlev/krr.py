"""Kernel ridge regression on sampled features.

The training Gram is replaced by Z^T Z with Z = Pi Phi (s x n); the
coefficients come from the Woodbury form so only an s x s system is
solved. Test predictions use the exact kernel.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from .errors import ContractError, NumericalError
from .kernels import k_ntk


def woodbury_coefficients(Z: np.ndarray, Y: np.ndarray, lam: float) -> np.ndarray:
    """(Z^T Z + lam I)^{-1} Y via (Y - Z^T (Z Z^T + lam I)^{-1} Z Y) / lam."""
    if not lam > 0:
        raise ContractError("lambda must be positive")
    Z = np.asarray(Z, dtype=float)
    S = Z @ Z.T + lam * np.eye(Z.shape[0])
    try:
        inner = sla.solve(S, Z @ Y, assume_a="pos")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"Woodbury solve failed: {exc}") from None
    c = (Y - Z.T @ inner) / lam
    if not np.all(np.isfinite(c)):
        raise NumericalError("Woodbury solve produced non-finite coefficients")
    return c


def cross_kernel(kind: str, A: np.ndarray, B: np.ndarray, q: int = 2) -> np.ndarray:
    """k(a_i, b_j) for columns a_i of A and b_j of B."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    G = A.T @ B
    if kind == "gaussian":
        sa = np.einsum("ij,ij->j", A, A)
        sb = np.einsum("ij,ij->j", B, B)
        return np.exp(-np.maximum(sa[:, None] + sb[None, :] - 2 * G, 0) / 2)
    if kind == "ntk":
        na = np.linalg.norm(A, axis=0)
        nb = np.linalg.norm(B, axis=0)
        if np.any(na == 0) or np.any(nb == 0):
            raise ContractError("NTK is undefined for a zero column")
        return na[:, None] * nb[None, :] * k_ntk(G / np.outer(na, nb))
    if kind == "poly":
        return G**q
    raise ContractError(f"no exact kernel for {kind!r}")


def one_hot(labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    classes = np.unique(labels)
    return (labels[:, None] == classes[None, :]).astype(float), classes


def rmse(pred: np.ndarray, y: np.ndarray) -> float:
    return float(np.sqrt(np.mean((np.asarray(pred) - np.asarray(y)) ** 2)))


def krr_predict(Z, y_train, lam, K_test_train, task: str = "regression"):
    """Fit on sampled features and predict with the exact test kernel."""
    if task == "classification":
        Y, classes = one_hot(np.asarray(y_train))
        scores = K_test_train @ woodbury_coefficients(Z, Y, lam)
        return classes[np.argmax(scores, axis=1)]
    return K_test_train @ woodbury_coefficients(Z, np.asarray(y_train, dtype=float), lam)
