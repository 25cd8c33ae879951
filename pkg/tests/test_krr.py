import numpy as np
import pytest

from tensorlev.errors import ContractError
from tensorlev.features import SelfTensor
from tensorlev.kernels import gaussian_kernel_exact, ntk_kernel_exact
from tensorlev.krr import cross_kernel, krr_predict, one_hot, rmse, woodbury_coefficients
from tensorlev.oracle import materialize_phi


def test_woodbury_matches_direct_solve(gen):
    Z = gen.standard_normal((7, 12))
    y = gen.standard_normal(12)
    c = woodbury_coefficients(Z, y, 0.3)
    assert np.allclose(c, np.linalg.solve(Z.T @ Z + 0.3 * np.eye(12), y))
    with pytest.raises(ContractError):
        woodbury_coefficients(Z, y, 0.0)


def test_huge_ridge_predicts_zero(gen):
    Xtr, Xte = gen.standard_normal((3, 20)), gen.standard_normal((3, 8))
    ytr, yte = gen.standard_normal(20), gen.standard_normal(8)
    Z = gen.standard_normal((5, 20))
    pred = krr_predict(Z, ytr, 1e9, cross_kernel("gaussian", Xte, Xtr))
    assert np.abs(pred).max() < 1e-6
    assert rmse(pred, yte) == pytest.approx(np.sqrt(np.mean(yte**2)), rel=1e-6)


def test_exact_features_reproduce_exact_krr(gen):
    Xtr, Xte = gen.standard_normal((3, 30)), gen.standard_normal((3, 10))
    ytr, yte = gen.standard_normal(30), gen.standard_normal(10)
    lam = 0.5
    Phi = materialize_phi(SelfTensor(Xtr, 2)).matrix
    Kx = cross_kernel("poly", Xte, Xtr, 2)
    approx = rmse(krr_predict(Phi, ytr, lam, Kx), yte)
    exact = rmse(Kx @ np.linalg.solve((Xtr.T @ Xtr) ** 2 + lam * np.eye(30), ytr), yte)
    assert approx == pytest.approx(exact, abs=1e-8)


def test_cross_kernels_match_gram(gen):
    X = gen.standard_normal((4, 6))
    assert np.allclose(cross_kernel("gaussian", X, X), gaussian_kernel_exact(X))
    assert np.allclose(cross_kernel("ntk", X, X), ntk_kernel_exact(X))
    assert np.allclose(cross_kernel("poly", X, X, 3), (X.T @ X) ** 3)
    with pytest.raises(ContractError):
        cross_kernel("laplace", X, X)


def test_classification_one_hot(gen):
    labels = np.array([2.0, 0.0, 2.0, 1.0])
    Y, classes = one_hot(labels)
    assert classes.tolist() == [0.0, 1.0, 2.0]
    assert np.array_equal(Y.argmax(axis=1), [2, 0, 2, 1])
    X = np.hstack([gen.standard_normal((2, 10)) - 3, gen.standard_normal((2, 10)) + 3])
    y = np.repeat([0.0, 1.0], 10)
    Phi = np.vstack([X, np.ones((1, 20))])
    pred = krr_predict(Phi, y, 1e-3, X.T @ X + 1, task="classification")
    assert np.mean(pred == y) >= 0.95
