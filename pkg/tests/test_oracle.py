import numpy as np
import pytest
from hypothesis import given, strategies as st

from tensorlev.errors import ContractError
from tensorlev.features import Gpk, SelfTensor, TensorProduct, frobenius_sq
from tensorlev.kernels import statistical_dimension
from tensorlev.oracle import (
    categorical_sample,
    exact_ridge_leverage_scores,
    exact_row_norm_distribution,
    materialize_phi,
    ridge_inv_sqrt,
    spectral_check,
    tv_distance,
)


def test_phi_of_basis_vectors():
    phi = materialize_phi(SelfTensor(np.eye(2), 2)).matrix
    assert np.array_equal(phi[:, 0], [1, 0, 0, 0])
    assert np.array_equal(phi[:, 1], [0, 0, 0, 1])


def test_reshape_identity(gen):
    # row (i,j), col k of (A (x) B) C^T equals row i, col (j,k) of A (B (x) C)^T
    A, B, C = (gen.standard_normal((2, 2)) for _ in range(3))
    AB = materialize_phi(TensorProduct((A, B))).matrix
    BC = materialize_phi(TensorProduct((B, C))).matrix
    L = AB @ C.T
    R = A @ BC.T
    for i in range(2):
        for j in range(2):
            for k in range(2):
                assert L[2 * i + j, k] == pytest.approx(R[i, 2 * j + k])


def test_gpk_blocks(gen):
    X = gen.standard_normal((3, 4))
    phi = materialize_phi(Gpk(X, np.ones(4), np.array([1.0, 1.0])))
    assert phi.blocks == (0, 1) and phi.offsets == (0, 1)
    assert np.array_equal(phi.matrix[0], np.ones(4))
    assert np.array_equal(phi.matrix[1:], X)


@given(st.integers(1, 4), st.integers(1, 3), st.data())
def test_codec_round_trip(d, q, data):
    X = np.ones((d, 2))
    phi = materialize_phi(Gpk(X, np.ones(2), np.ones(q + 1)))
    row = data.draw(st.integers(0, phi.n_rows - 1))
    b, idx = phi.decode(row)
    assert phi.encode(b, idx) == row


def test_codec_matches_tensor_entries(gen):
    A, B = gen.standard_normal((3, 5)), gen.standard_normal((4, 5))
    phi = materialize_phi(TensorProduct((A, B)))
    for row in range(phi.n_rows):
        _, (i, j) = phi.decode(row)
        assert np.allclose(phi.matrix[row], A[i] * B[j])


def test_materialize_cap():
    with pytest.raises(ContractError):
        materialize_phi(SelfTensor(np.ones((10, 5)), 4), cap=1000)


def test_frobenius_examples(gen):
    assert frobenius_sq(SelfTensor(np.array([[1.0], [0.0]]), 5)) == pytest.approx(1.0)
    assert frobenius_sq(TensorProduct((np.eye(2), np.eye(2)))) == pytest.approx(2.0)
    X = gen.standard_normal((4, 6))
    ref = np.sum(materialize_phi(SelfTensor(X, 3)).matrix ** 2)
    assert frobenius_sq(SelfTensor(X, 3)) == pytest.approx(ref, rel=1e-9)
    G = Gpk(X, gen.random(6), np.array([1.0, 0.5, 0.3]))
    assert frobenius_sq(G) == pytest.approx(np.sum(materialize_phi(G).matrix ** 2), rel=1e-9)


def test_ridge_inv_sqrt(gen):
    B = gen.standard_normal((3, 5))
    R = ridge_inv_sqrt(B, 0.7, 5)
    assert np.allclose(R @ (B.T @ B + 0.7 * np.eye(5)) @ R, np.eye(5))


def test_leverage_scores_identity():
    assert np.allclose(exact_ridge_leverage_scores(np.eye(5), 1.0), 0.5)


def test_leverage_scores_small_lambda(gen):
    P = gen.standard_normal((8, 3))
    assert exact_ridge_leverage_scores(P, 1e-12).sum() == pytest.approx(3.0, abs=1e-6)


def test_leverage_scores_sum_to_statistical_dimension(gen):
    P = gen.standard_normal((8, 3))
    assert exact_ridge_leverage_scores(P, 0.3).sum() == pytest.approx(statistical_dimension(P.T @ P, 0.3))


def test_row_norm_distribution_uniform():
    assert np.allclose(exact_row_norm_distribution(np.eye(4), None, 1.0), 0.25)


@given(st.integers(0, 1000))
def test_row_norm_distribution_normalized(seed):
    g = np.random.default_rng(seed)
    p = exact_row_norm_distribution(g.standard_normal((7, 3)), g.standard_normal((2, 3)), 0.5)
    assert abs(p.sum() - 1) <= 1e-12 and np.all(p >= 0)


def test_row_norm_distribution_monte_carlo(gen):
    # a literal sampler: draw rows with probability proportional to squared row norms of P (B^T B + lam I)^{-1/2}
    P, B = gen.standard_normal((6, 3)), gen.standard_normal((2, 3))
    p = exact_row_norm_distribution(P, B, 0.4)
    w, U = np.linalg.eigh(B.T @ B + 0.4 * np.eye(3))
    Y = P @ U @ np.diag(w**-0.5) @ U.T
    direct = np.sum(Y**2, axis=1)
    draws = categorical_sample(direct / direct.sum(), 50000, np.random.default_rng(1))
    phat = np.bincount(draws, minlength=6) / 50000
    assert np.all(np.abs(phat - p) <= 3 * np.sqrt(p * (1 - p) / 50000) + 1e-12)


def test_tv_distance():
    assert tv_distance([0.3, 0.7], [0.3, 0.7]) == 0.0
    assert tv_distance([1, 0], [0, 1]) == 1.0
    assert tv_distance([0.5, 0.5], [1, 0]) == 0.5
    with pytest.raises(ContractError):
        tv_distance([0.5, 0.4], [1, 0])


def test_spectral_check_exact_factor(gen):
    A = gen.standard_normal((5, 6))
    ok, dev = spectral_check(A.T @ A, A, 1.0, 0.1)
    assert ok and dev == pytest.approx(0.0, abs=1e-10)


def test_spectral_check_zero_sketch_fails(gen):
    A = gen.standard_normal((5, 6))
    K = 100 * A.T @ A
    ok, _ = spectral_check(K, np.zeros((1, 6)), 0.1, 0.5)
    assert not ok


def test_spectral_check_scaled(gen):
    A = gen.standard_normal((5, 6))
    K = A.T @ A
    eps = 0.5
    Z = np.sqrt(1 + eps / 2) * A
    lam = 10 * np.linalg.norm(K, 2)
    ok, dev = spectral_check(K, Z, lam, eps)
    # eigenvalues of the whitened matrix lie in [1, 1 + (eps/2) |K|/(|K| + lam)]
    mu = np.linalg.eigvalsh(K)
    assert ok
    assert dev == pytest.approx((eps / 2) * mu.max() / (mu.max() + lam), rel=1e-8)


def test_spectral_check_contracts(gen):
    with pytest.raises(ContractError):
        spectral_check(gen.standard_normal((3, 3)), np.zeros((1, 3)), 1.0, 0.5)
    with pytest.raises(ContractError):
        spectral_check(np.eye(3), np.zeros((1, 4)), 1.0, 0.5)
