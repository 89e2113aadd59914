"""Sparse factors and the multi-layer sparse operator built from them."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from . import kernels


class SparseMatrix:
    """Real matrix in coordinate-list form, sorted by (row, col).

    Explicit zeros are dropped at construction, so ``nnz`` is the exact
    l0 count. Instances are treated as immutable; a CSR view for products is
    built lazily and cached.
    """

    def __init__(self, shape, row, col, val):
        rows, cols = (int(shape[0]), int(shape[1]))
        if rows < 1 or cols < 1:
            raise ValueError(f"dimensions must be positive, got {shape}")
        row = np.asarray(row, dtype=np.int64).ravel()
        col = np.asarray(col, dtype=np.int64).ravel()
        val = np.asarray(val, dtype=np.float64).ravel()
        if not (len(row) == len(col) == len(val)):
            raise ValueError("row, col and val must have equal length")
        if len(row):
            if row.min() < 0 or row.max() >= rows or col.min() < 0 or col.max() >= cols:
                raise ValueError("index out of bounds")
            if not np.all(np.isfinite(val)):
                raise ValueError("non-finite value")
        keep = val != 0.0
        row, col, val = row[keep], col[keep], val[keep]
        order = np.lexsort((col, row))
        row, col, val = row[order], col[order], val[order]
        if len(row) > 1:
            dup = (np.diff(row) == 0) & (np.diff(col) == 0)
            if dup.any():
                raise ValueError("duplicate index pair")
        for a in (row, col, val):
            a.setflags(write=False)
        self.shape = (rows, cols)
        self.row, self.col, self.val = row, col, val

    @classmethod
    def from_dense(cls, a) -> SparseMatrix:
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2:
            raise ValueError("expected a 2-d array")
        r, c = np.nonzero(a)
        return cls(a.shape, r, c, a[r, c])

    @classmethod
    def identity(cls, rows, cols=None) -> SparseMatrix:
        """Rectangular identity: ones on the main diagonal."""
        cols = rows if cols is None else cols
        d = np.arange(min(rows, cols))
        return cls((rows, cols), d, d, np.ones(len(d)))

    @classmethod
    def zeros(cls, rows, cols) -> SparseMatrix:
        return cls((rows, cols), [], [], [])

    @property
    def rows(self) -> int:
        return self.shape[0]

    @property
    def cols(self) -> int:
        return self.shape[1]

    @property
    def nnz(self) -> int:
        return len(self.val)

    @cached_property
    def _csr(self):
        indptr = np.zeros(self.rows + 1, dtype=np.int64)
        np.cumsum(np.bincount(self.row, minlength=self.rows), out=indptr[1:])
        return indptr, np.ascontiguousarray(self.col), np.ascontiguousarray(self.val)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.ascontiguousarray(x, dtype=np.float64)
        if x.shape != (self.cols,):
            raise ValueError(f"vector length {x.shape} does not match {self.cols} columns")
        out = np.empty(self.rows)
        kernels.csr_matvec(*self._csr, x, out)
        return out

    def rmatvec(self, x: np.ndarray) -> np.ndarray:
        x = np.ascontiguousarray(x, dtype=np.float64)
        if x.shape != (self.rows,):
            raise ValueError(f"vector length {x.shape} does not match {self.rows} rows")
        out = np.empty(self.cols)
        kernels.csr_rmatvec(*self._csr, x, out)
        return out

    def toarray(self) -> np.ndarray:
        a = np.zeros(self.shape)
        a[self.row, self.col] = self.val
        return a

    @property
    def T(self) -> SparseMatrix:
        return SparseMatrix((self.cols, self.rows), self.col, self.row, self.val)

    def triplets(self) -> list[tuple[int, int, float]]:
        return [(int(r), int(c), float(v)) for r, c, v in zip(self.row, self.col, self.val)]

    def __eq__(self, other):
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        return (self.shape == other.shape and np.array_equal(self.row, other.row)
                and np.array_equal(self.col, other.col) and np.array_equal(self.val, other.val))

    def __repr__(self):
        return f"SparseMatrix(shape={self.shape}, nnz={self.nnz})"


@dataclass
class FlopCounter:
    """Operation tally for operator applications.

    A sparse factor costs one multiply-add per stored entry and the final
    scaling one multiply per output entry, so ``flops`` is
    ``2 * multiply_adds + scalings``.
    """

    multiply_adds: int = 0
    scalings: int = 0

    def add(self, count: int) -> None:
        if count < 0:
            raise ValueError("flop increments are nonnegative")
        self.multiply_adds += int(count)

    def add_scaling(self, count: int) -> None:
        if count < 0:
            raise ValueError("flop increments are nonnegative")
        self.scalings += int(count)

    @property
    def flops(self) -> int:
        return 2 * self.multiply_adds + self.scalings


class FaustOperator:
    """``scale * S_J @ ... @ S_1`` stored as sparse factors.

    ``factors`` is ordered leftmost first, i.e. ``factors[0]`` is ``S_J``
    (output side) and ``factors[-1]`` is ``S_1`` (input side).
    """

    def __init__(self, factors: Sequence[SparseMatrix], scale: float = 1.0):
        factors = [f if isinstance(f, SparseMatrix) else SparseMatrix.from_dense(f)
                   for f in factors]
        if not factors:
            raise ValueError("a FAuST needs at least one factor")
        for left, right in zip(factors, factors[1:]):
            if left.cols != right.rows:
                raise ValueError(
                    f"factor dimensions do not chain: {left.shape} then {right.shape}")
        scale = float(scale)
        if not np.isfinite(scale):
            raise ValueError("scale must be finite")
        self.factors = tuple(factors)
        self.scale = scale

    @classmethod
    def from_dense_factors(cls, factors, scale=1.0) -> FaustOperator:
        return cls([SparseMatrix.from_dense(f) for f in factors], scale)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.factors[0].rows, self.factors[-1].cols)

    @property
    def n_factors(self) -> int:
        return len(self.factors)

    @property
    def dims(self) -> list[int]:
        """``[a_1, ..., a_{J+1}]``: input dimension first."""
        return [self.factors[-1].cols] + [f.rows for f in reversed(self.factors)]

    @property
    def s_tot(self) -> int:
        return sum(f.nnz for f in self.factors)

    def apply(self, v, counter: FlopCounter | None = None) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.shape[1],):
            raise ValueError(f"expected a vector of length {self.shape[1]}, got shape {v.shape}")
        for f in reversed(self.factors):
            v = f.matvec(v)
            if counter is not None:
                counter.add(f.nnz)
        if self.scale != 1.0:
            v = self.scale * v
            if counter is not None:
                counter.add_scaling(len(v))
        return v

    def apply_transpose(self, v, counter: FlopCounter | None = None) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.shape[0],):
            raise ValueError(f"expected a vector of length {self.shape[0]}, got shape {v.shape}")
        for f in self.factors:
            v = f.rmatvec(v)
            if counter is not None:
                counter.add(f.nnz)
        if self.scale != 1.0:
            v = self.scale * v
            if counter is not None:
                counter.add_scaling(len(v))
        return v

    def toarray(self) -> np.ndarray:
        out = self.factors[-1].toarray()
        for f in reversed(self.factors[:-1]):
            out = f.toarray() @ out
        return self.scale * out

    @property
    def T(self) -> FaustOperator:
        return FaustOperator([f.T for f in reversed(self.factors)], self.scale)

    def __repr__(self):
        return (f"FaustOperator(shape={self.shape}, n_factors={self.n_factors}, "
                f"s_tot={self.s_tot}, scale={self.scale:.6g})")


def faust_apply(F: FaustOperator, v, counter: FlopCounter | None = None) -> np.ndarray:
    return F.apply(v, counter)


def faust_apply_transpose(F: FaustOperator, v, counter: FlopCounter | None = None) -> np.ndarray:
    return F.apply_transpose(v, counter)


def faust_to_dense(F: FaustOperator) -> np.ndarray:
    return F.toarray()


def relative_complexity(F: FaustOperator, A) -> float:
    """``s_tot / ||A||_0``; the complexity gain is its inverse."""
    nnz = np.count_nonzero(np.asarray(A))
    if nnz == 0:
        raise ValueError("relative complexity undefined for an all-zero matrix")
    return F.s_tot / nnz


def relative_error(A, F, **norm_kw) -> float:
    """Spectral-norm error ``||A - F||_2 / ||A||_2``.

    ``F`` may be a :class:`FaustOperator` or a dense array.
    """
    from .linalg import spectral_norm

    A = np.asarray(A, dtype=np.float64)
    approx = F.toarray() if isinstance(F, FaustOperator) else np.asarray(F, dtype=np.float64)
    if approx.shape != A.shape:
        raise ValueError(f"shape mismatch: {A.shape} vs {approx.shape}")
    if not A.any():
        raise ValueError("relative error undefined for an all-zero matrix")
    diff = A - approx
    if not diff.any():
        return 0.0
    return spectral_norm(diff, **norm_kw) / spectral_norm(A, **norm_kw)
