import warnings

import numpy as np
import pytest

from faustkit import ConvergenceWarning, spectral_norm, truncated_svd

from oracles import sigma_max_eig


def test_spectral_norm_diag():
    assert spectral_norm(np.diag([3.0, 1.0])) == pytest.approx(3.0, rel=1e-9)


def test_spectral_norm_orthogonal(rng):
    Q, _ = np.linalg.qr(rng.standard_normal((6, 6)))
    assert spectral_norm(Q) == pytest.approx(1.0, rel=1e-9)


@pytest.mark.parametrize("seed", range(40))
def test_spectral_norm_vs_eigen_oracle(seed):
    M = np.random.default_rng(seed).standard_normal((8, 8))
    assert spectral_norm(M) == pytest.approx(sigma_max_eig(M), rel=1e-8)


def test_spectral_norm_rectangular_uses_small_gram(rng):
    M = rng.standard_normal((3, 40))
    assert spectral_norm(M) == pytest.approx(sigma_max_eig(M.T), rel=1e-8)


def test_spectral_norm_close_singular_values():
    M = np.diag([2.0, 1.9, 1.0, 0.3])
    with warnings.catch_warnings():
        warnings.simplefilter("error", ConvergenceWarning)
        assert spectral_norm(M) == pytest.approx(2.0, rel=1e-8)


def test_spectral_norm_deterministic(rng):
    M = rng.standard_normal((7, 5))
    assert spectral_norm(M, seed=3) == spectral_norm(M, seed=3)


def test_spectral_norm_zero_matrix():
    with pytest.raises(ValueError):
        spectral_norm(np.zeros((3, 3)))


def test_spectral_norm_cap_warns():
    # one step never meets the change test
    M = np.diag([1.0, 0.9, 0.5])
    with pytest.warns(ConvergenceWarning):
        sigma, converged, it = spectral_norm(M, max_iter=1, return_info=True)
    assert not converged and it == 1
    assert 0.5 < sigma <= 1.0


def test_truncated_svd_rank_one(rng):
    u, v = rng.standard_normal(5), rng.standard_normal(4)
    A = np.outer(u, v)
    U, s, V = truncated_svd(A, 1)
    np.testing.assert_allclose((U * s) @ V.T, A, atol=1e-12)


def test_truncated_svd_identity_full_rank():
    U, s, V = truncated_svd(np.eye(5), 5)
    np.testing.assert_allclose((U * s) @ V.T, np.eye(5), atol=1e-12)


def test_truncated_svd_vs_eigen_oracle(rng):
    A = rng.standard_normal((12, 7))
    U, s, V = truncated_svd(A, 3)
    oracle = np.sqrt(np.sort(np.linalg.eigvalsh(A.T @ A))[::-1])
    np.testing.assert_allclose(s, oracle[:3], rtol=1e-7)
    assert np.all(np.diff(s) <= 0)
    np.testing.assert_allclose(U.T @ U, np.eye(3), atol=1e-8)
    np.testing.assert_allclose(V.T @ V, np.eye(3), atol=1e-8)
    err = np.linalg.svd(A - (U * s) @ V.T, compute_uv=False)[0]
    assert err == pytest.approx(oracle[3], rel=1e-7)


@pytest.mark.parametrize("shape,r", [((20, 30), 4), ((30, 9), 2), ((15, 15), 7)])
def test_truncated_svd_error_is_next_singular_value(shape, r):
    A = np.random.default_rng(r).standard_normal(shape)
    U, s, V = truncated_svd(A, r)
    oracle = np.sqrt(np.sort(np.linalg.eigvalsh(A.T @ A if shape[1] <= shape[0] else A @ A.T))[::-1])
    err = sigma_max_eig(A - (U * s) @ V.T)
    assert err == pytest.approx(oracle[r], rel=1e-7)


@pytest.mark.parametrize("r", [0, 6])
def test_truncated_svd_rank_range(r):
    with pytest.raises(ValueError):
        truncated_svd(np.ones((5, 6)), r)
