"""Spectral norm by power iteration and truncated SVD by subspace iteration."""

from __future__ import annotations

import warnings

import numpy as np


class ConvergenceWarning(UserWarning):
    """An iterative method hit its iteration cap before meeting its tolerance."""


_SQUARINGS = 3
_SQUARING_MAX_ORDER = 512


def _gram(M: np.ndarray) -> np.ndarray:
    # the smaller Gram matrix has the same nonzero spectrum
    return M.T @ M if M.shape[1] <= M.shape[0] else M @ M.T


def spectral_norm(M, tol: float = 1e-9, max_iter: int | None = None, seed: int = 0,
                  return_info: bool = False):
    """Largest singular value of ``M`` by power iteration on its Gram matrix.

    The iteration starts from a seeded uniform random vector and stops once
    the Rayleigh quotient changes by less than ``tol`` (relative). When
    ``max_iter`` (default ``10 * max(m, n)``) is exhausted the best estimate
    is returned and a :class:`ConvergenceWarning` is issued.

    Gram matrices of order up to 512 are first squared three times, so each
    step applies ``G^8`` and a small spectral gap costs 8 times fewer steps.
    The Rayleigh quotient is always taken on ``G`` itself.

    With ``return_info=True`` the result is ``(sigma, converged, n_iter)``.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError("expected a 2-d array")
    if not M.any():
        raise ValueError("spectral norm requested for an all-zero matrix")
    if max_iter is None:
        max_iter = 10 * max(M.shape)
    G = _gram(M)
    B = G / np.trace(G)
    if G.shape[0] <= _SQUARING_MAX_ORDER:
        for _ in range(_SQUARINGS):
            B = B @ B
            B /= np.trace(B)
    rng = np.random.default_rng(seed)
    v = rng.uniform(size=G.shape[0])
    v /= np.linalg.norm(v)
    est = 0.0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        w = B @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            # start vector in the null space; restart from a fresh draw
            v = rng.standard_normal(G.shape[0])
            v /= np.linalg.norm(v)
            continue
        v = w / nw
        new = float(v @ (G @ v))
        if est > 0.0 and abs(new - est) <= tol * new:
            est = max(est, new)
            converged = True
            break
        est = new
    if not converged:
        warnings.warn(f"power iteration stopped after {max_iter} iterations",
                      ConvergenceWarning, stacklevel=2)
    sigma = float(np.sqrt(max(est, 0.0)))
    if return_info:
        return sigma, converged, it
    return sigma


def truncated_svd(A, r: int, tol: float = 1e-12, max_iter: int = 2000, seed: int = 0):
    """Rank-``r`` SVD ``(U, s, V)`` with ``A ~= U @ diag(s) @ V.T``.

    Orthogonal iteration on ``A^T A`` with an oversampled block, followed by a
    Rayleigh-Ritz step. Iteration stops when the leading ``r`` Ritz values
    change by less than ``tol`` (relative).
    """
    A = np.asarray(A, dtype=np.float64)
    m, n = A.shape
    if not 1 <= r <= min(m, n):
        raise ValueError(f"rank {r} outside [1, {min(m, n)}]")
    block = min(min(m, n), 2 * r + 5)
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((n, block)))
    prev = None
    for _ in range(max_iter):
        Z, _ = np.linalg.qr(A @ Q)
        Q, _ = np.linalg.qr(A.T @ Z)
        if block == min(m, n):
            break
        ritz = np.linalg.svd(A @ Q, compute_uv=False)[:r]
        if prev is not None and np.all(np.abs(ritz - prev) <= tol * max(ritz[0], 1e-300)):
            break
        prev = ritz
    else:
        warnings.warn("subspace iteration did not converge", ConvergenceWarning, stacklevel=2)
    # Rayleigh-Ritz on the converged subspace
    Ub, s, Wt = np.linalg.svd(A @ Q, full_matrices=False)
    U = Ub[:, :r]
    V = Q @ Wt.T[:, :r]
    return U, s[:r], V


class NumericalError(ArithmeticError):
    """An iterate became non-finite or an iteration diverged."""
