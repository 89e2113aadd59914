"""Synthetic inputs: planted sparse products, Hadamard matrices, a test image."""

from __future__ import annotations

from importlib.resources import files

import numpy as np
import scipy.linalg

from .sparse import FaustOperator


def hadamard(n: int) -> np.ndarray:
    """Sylvester Hadamard matrix of order ``n`` (a power of two), entries +-1."""
    if n < 1 or n & (n - 1):
        raise ValueError(f"n must be a power of two, got {n}")
    return scipy.linalg.hadamard(n).astype(np.float64)


def planted_faust(m: int, n: int, J: int, k: int, s: int, seed: int = 0,
                  identity_weight: float = 1.0, unit_columns: bool = False) -> FaustOperator:
    """Random ``m x n`` product of ``J`` sparse factors.

    ``S_1`` (``m x n``) has ``k`` Gaussian entries per column; each further
    ``m x m`` factor has ``s`` random Gaussian entries plus
    ``identity_weight * I``, which keeps the product well conditioned. With
    ``unit_columns`` the columns of ``S_1`` are rescaled so the product has
    unit-norm columns.
    """
    if J < 1 or not 1 <= k <= m:
        raise ValueError("need J >= 1 and 1 <= k <= m")
    rng = np.random.default_rng(seed)
    S1 = np.zeros((m, n))
    for j in range(n):
        S1[rng.choice(m, k, replace=False), j] = rng.standard_normal(k)
    factors = [S1]
    for _ in range(J - 1):
        S = np.zeros((m, m))
        S.flat[rng.choice(m * m, min(s, m * m), replace=False)] = rng.standard_normal(min(s, m * m))
        factors.append(S + identity_weight * np.eye(m))
    if unit_columns:
        prod = factors[0]
        for f in factors[1:]:
            prod = f @ prod
        norms = np.linalg.norm(prod, axis=0)
        factors[0] = factors[0] / np.where(norms > 0, norms, 1.0)
    return FaustOperator.from_dense_factors(factors[::-1])


def test_image() -> np.ndarray:
    """The bundled 128 x 128 grayscale test image, values in ``[0, 255]``."""
    from .io import read_pgm

    return read_pgm(files("faustkit") / "data" / "shapes128.pgm")
