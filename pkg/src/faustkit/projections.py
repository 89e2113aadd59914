"""Euclidean projections onto sparse, unit-Frobenius-norm constraint sets.

Every sparsity-type set here is intersected with the unit sphere
``||S||_F = 1``. The projection keeps the admissible entries of largest
magnitude and rescales them, which is the exact minimizer of ``||S - U||_F``
over the set. Ties in magnitude go to the lowest column-major linear index.

When every kept entry is zero the normalization is undefined; the result is
then the constant ``1/sqrt(q)`` on the ``q`` positions the tie-breaking rule
selects, so the operator stays total.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


def top_k_select(values, k: int) -> np.ndarray:
    """Sorted indices of the ``k`` entries of largest magnitude.

    2-d input is flattened in column-major order. Equal magnitudes resolve to
    the smaller index.
    """
    v = np.asarray(values, dtype=np.float64)
    flat = v.ravel(order="F")
    if not 0 <= k <= flat.size:
        raise ValueError(f"k={k} outside [0, {flat.size}]")
    order = np.argsort(-np.abs(flat), kind="stable")
    return np.sort(order[:k])


def _unit_on_support(U: np.ndarray, keep: np.ndarray) -> np.ndarray:
    out = np.where(keep, U, 0.0)
    norm = np.linalg.norm(out)
    if norm == 0.0:
        count = np.count_nonzero(keep)
        if count == 0:
            raise ValueError("constraint admits no nonzero entry")
        return keep / np.sqrt(count)
    return out / norm


def _mask_from_flat(shape, idx) -> np.ndarray:
    mask = np.zeros(shape[0] * shape[1], dtype=bool)
    mask[idx] = True
    return mask.reshape(shape, order="F")


class ConstraintSet:
    """Base class; subclasses are frozen dataclasses with a ``shape`` field."""

    shape: tuple[int, int]
    normalized = True

    def project(self, U) -> np.ndarray:
        raise NotImplementedError

    def support_ok(self, S: np.ndarray) -> bool:
        raise NotImplementedError

    def contains(self, S, tol: float = 1e-10) -> bool:
        S = np.asarray(S, dtype=np.float64)
        if S.shape != tuple(self.shape):
            return False
        if self.normalized and abs(np.linalg.norm(S) - 1.0) > tol:
            return False
        return self.support_ok(S)

    def transposed(self) -> ConstraintSet:
        raise NotImplementedError

    def _check(self, U) -> np.ndarray:
        U = np.asarray(U, dtype=np.float64)
        if U.shape != tuple(self.shape):
            raise ValueError(f"shape mismatch: constraint {self.shape}, input {U.shape}")
        return U


def _check_budget(name, value):
    if int(value) != value or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value}")


@dataclass(frozen=True)
class GlobalSparsity(ConstraintSet):
    """At most ``s`` nonzeros overall. Budgets above ``rows*cols`` are vacuous."""

    shape: tuple[int, int]
    s: int

    def __post_init__(self):
        _check_budget("s", self.s)

    def project(self, U):
        U = self._check(U)
        k = min(self.s, U.size)
        return _unit_on_support(U, _mask_from_flat(U.shape, top_k_select(U, k)))

    def support_ok(self, S):
        return np.count_nonzero(S) <= self.s

    def transposed(self):
        return GlobalSparsity(self.shape[::-1], self.s)


@dataclass(frozen=True)
class PerColumnSparsity(ConstraintSet):
    shape: tuple[int, int]
    k: int

    def __post_init__(self):
        _check_budget("k", self.k)

    def project(self, U):
        U = self._check(U)
        k = min(self.k, U.shape[0])
        order = np.argsort(-np.abs(U), axis=0, kind="stable")[:k]
        keep = np.zeros(U.shape, dtype=bool)
        np.put_along_axis(keep, order, True, axis=0)
        return _unit_on_support(U, keep)

    def support_ok(self, S):
        return bool(np.all(np.count_nonzero(S, axis=0) <= self.k))

    def transposed(self):
        return PerRowSparsity(self.shape[::-1], self.k)


@dataclass(frozen=True)
class PerRowSparsity(ConstraintSet):
    shape: tuple[int, int]
    k: int

    def __post_init__(self):
        _check_budget("k", self.k)

    def project(self, U):
        U = self._check(U)
        k = min(self.k, U.shape[1])
        order = np.argsort(-np.abs(U), axis=1, kind="stable")[:, :k]
        keep = np.zeros(U.shape, dtype=bool)
        np.put_along_axis(keep, order, True, axis=1)
        return _unit_on_support(U, keep)

    def support_ok(self, S):
        return bool(np.all(np.count_nonzero(S, axis=1) <= self.k))

    def transposed(self):
        return PerColumnSparsity(self.shape[::-1], self.k)


@dataclass(frozen=True)
class RowColSparsity(ConstraintSet):
    """Support = union of the ``k`` largest entries of every row and column.

    This is a heuristic, not the Euclidean projection onto a fixed set: the
    union may hold up to about ``2 * k * max(rows, cols)`` entries. On inputs
    with many exactly tied magnitudes (the Hadamard transform from the
    default start) the oversized first support breaks the symmetry that
    traps the exact projections.
    """

    shape: tuple[int, int]
    k: int

    def __post_init__(self):
        _check_budget("k", self.k)

    def _keep(self, U):
        keep = np.zeros(U.shape, dtype=bool)
        kc = min(self.k, U.shape[0])
        kr = min(self.k, U.shape[1])
        mag = -np.abs(U)
        np.put_along_axis(keep, np.argsort(mag, axis=0, kind="stable")[:kc], True, axis=0)
        np.put_along_axis(keep, np.argsort(mag, axis=1, kind="stable")[:, :kr], True, axis=1)
        return keep

    def project(self, U):
        U = self._check(U)
        return _unit_on_support(U, self._keep(U))

    def support_ok(self, S):
        return not np.any(S[~self._keep(S)])

    @property
    def nnz_budget(self) -> int:
        return self.k * max(self.shape)

    def transposed(self):
        return RowColSparsity(self.shape[::-1], self.k)


@dataclass(frozen=True, eq=False)
class PartitionSparsity(ConstraintSet):
    """At most ``budgets[b]`` nonzeros inside each block ``labels == b``.

    ``labels`` is an integer array of the matrix shape assigning every entry
    to one of ``len(budgets)`` blocks.
    """

    shape: tuple[int, int]
    labels: np.ndarray
    budgets: tuple[int, ...]

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.shape != tuple(self.shape):
            raise ValueError("labels must have the matrix shape")
        if labels.min() < 0 or labels.max() >= len(self.budgets):
            raise ValueError("every entry must belong to a block 0..K-1")
        for b in self.budgets:
            _check_budget("block budget", b)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "budgets", tuple(int(b) for b in self.budgets))

    def project(self, U):
        U = self._check(U)
        flat = U.ravel(order="F")
        lab = self.labels.ravel(order="F")
        keep = np.zeros(flat.size, dtype=bool)
        for b, budget in enumerate(self.budgets):
            members = np.flatnonzero(lab == b)
            if len(members) == 0:
                continue
            chosen = top_k_select(flat[members], min(budget, len(members)))
            keep[members[chosen]] = True
        return _unit_on_support(U, keep.reshape(U.shape, order="F"))

    def support_ok(self, S):
        counts = np.bincount(self.labels[S != 0], minlength=len(self.budgets))
        return bool(np.all(counts <= np.asarray(self.budgets)))

    def transposed(self):
        return PartitionSparsity(self.shape[::-1], self.labels.T, self.budgets)


@dataclass(frozen=True, eq=False)
class FixedSupport(ConstraintSet):
    shape: tuple[int, int]
    mask: np.ndarray

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        if mask.shape != tuple(self.shape):
            raise ValueError("mask must have the matrix shape")
        if not mask.any():
            raise ValueError("support mask is empty")
        object.__setattr__(self, "mask", mask)

    def project(self, U):
        return _unit_on_support(self._check(U), self.mask)

    def support_ok(self, S):
        return not np.any(S[~self.mask])

    def transposed(self):
        return FixedSupport(self.shape[::-1], self.mask.T)


@dataclass(frozen=True)
class Triangular(ConstraintSet):
    shape: tuple[int, int]
    upper: bool = True

    def _mask(self):
        ones = np.ones(self.shape, dtype=bool)
        return np.triu(ones) if self.upper else np.tril(ones)

    def project(self, U):
        return _unit_on_support(self._check(U), self._mask())

    def support_ok(self, S):
        return not np.any(S[~self._mask()])

    def transposed(self):
        return Triangular(self.shape[::-1], not self.upper)


@dataclass(frozen=True)
class Diagonal(ConstraintSet):
    shape: tuple[int, int]

    def _mask(self):
        return np.eye(*self.shape, dtype=bool)

    def project(self, U):
        return _unit_on_support(self._check(U), self._mask())

    def support_ok(self, S):
        return not np.any(S[~self._mask()])

    def transposed(self):
        return Diagonal(self.shape[::-1])


@dataclass(frozen=True, eq=False)
class PiecewiseConstantSparse(ConstraintSet):
    """Constant on each group, zero elsewhere, at most ``s`` nonzero groups.

    ``groups`` is a sequence of ``(rows, cols)`` index-array pairs; groups
    must be pairwise disjoint. Circulant, Toeplitz and Hankel structures are
    obtained from :func:`circulant_groups`, :func:`toeplitz_groups` and
    :func:`hankel_groups`.
    """

    shape: tuple[int, int]
    groups: tuple
    s: int
    _labels: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        _check_budget("s", self.s)
        labels = np.full(self.shape, -1, dtype=np.int64)
        groups = []
        for g, (r, c) in enumerate(self.groups):
            r = np.asarray(r, dtype=np.int64)
            c = np.asarray(c, dtype=np.int64)
            if len(r) == 0 or len(r) != len(c):
                raise ValueError(f"group {g} is empty or malformed")
            if np.any(labels[r, c] != -1) or len(set(zip(r.tolist(), c.tolist()))) != len(r):
                raise ValueError(f"group {g} overlaps another group")
            labels[r, c] = g
            groups.append((r, c))
        object.__setattr__(self, "groups", tuple(groups))
        object.__setattr__(self, "_labels", labels)

    def group_sums(self, U) -> np.ndarray:
        return np.array([U[r, c].sum() for r, c in self.groups])

    def project(self, U):
        U = self._check(U)
        sizes = np.array([len(r) for r, _ in self.groups], dtype=np.float64)
        sums = self.group_sums(U)
        chosen = top_k_select(sums / np.sqrt(sizes), min(self.s, len(sizes)))
        # least squares value on a group is its mean; normalize the result
        level = np.zeros(len(sizes))
        level[chosen] = sums[chosen] / sizes[chosen]
        energy = np.sum(sizes * level**2)
        if energy == 0.0:
            level[chosen] = 1.0
            energy = np.sum(sizes[chosen])
        level /= np.sqrt(energy)
        out = np.zeros(U.shape)
        for g in chosen:
            r, c = self.groups[g]
            out[r, c] = level[g]
        return out

    def support_ok(self, S):
        if np.any(S[self._labels == -1]):
            return False
        active = 0
        for r, c in self.groups:
            vals = S[r, c]
            if np.ptp(vals) > 1e-12 * max(1.0, np.abs(vals).max()):
                return False
            active += bool(np.any(vals))
        return active <= self.s

    def transposed(self):
        return PiecewiseConstantSparse(self.shape[::-1], tuple((c, r) for r, c in self.groups),
                                       self.s)


@dataclass(frozen=True, eq=False)
class Fixed(ConstraintSet):
    """The factor is frozen at ``matrix``; projection returns it unchanged."""

    matrix: np.ndarray
    normalized = False

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.float64)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def shape(self):
        return self.matrix.shape

    def project(self, U):
        self._check(U)
        return self.matrix

    def support_ok(self, S):
        return np.array_equal(S, self.matrix)

    def transposed(self):
        return Fixed(self.matrix.T)


@dataclass(frozen=True)
class Unconstrained(ConstraintSet):
    shape: tuple[int, int] = (1, 1)
    normalized = False

    def project(self, U):
        return self._check(U).copy()

    def support_ok(self, S):
        return True

    def transposed(self):
        return Unconstrained(self.shape[::-1])


def project(U, c: ConstraintSet | str) -> np.ndarray:
    """Project ``U`` onto ``c``, a constraint or its textual form (see
    :func:`parse_constraint`)."""
    if isinstance(c, str):
        c = parse_constraint(c, np.shape(U))
    return c.project(U)


def circulant_groups(n: int):
    i, j = np.indices((n, n))
    d = (j - i) % n
    return tuple((i[d == k], j[d == k]) for k in range(n))


def toeplitz_groups(rows: int, cols: int):
    i, j = np.indices((rows, cols))
    d = j - i
    return tuple((i[d == k], j[d == k]) for k in range(-(rows - 1), cols))


def hankel_groups(rows: int, cols: int):
    i, j = np.indices((rows, cols))
    d = i + j
    return tuple((i[d == k], j[d == k]) for k in range(rows + cols - 1))


def row_groups(rows: int, cols: int):
    i, j = np.indices((rows, cols))
    return tuple((i[r], j[r]) for r in range(rows))


def column_groups(rows: int, cols: int):
    i, j = np.indices((rows, cols))
    return tuple((i[:, c], j[:, c]) for c in range(cols))


def column_partition(shape, k: int) -> PartitionSparsity:
    """Per-column budget ``k`` expressed as a partition constraint."""
    labels = np.broadcast_to(np.arange(shape[1]), shape)
    return PartitionSparsity(tuple(shape), labels, (k,) * shape[1])


def parse_constraint(text: str, shape: Sequence[int]) -> ConstraintSet:
    """Build a constraint from its textual form.

    Grammar (paths are read with :mod:`faustkit.io`)::

        sp:<s>              global sparsity
        spcol:<k>           k nonzeros per column
        sprow:<k>           k nonzeros per row
        splincol:<k>        union of the k largest per row and per column
        supp:<path>         support = nonzeros of the matrix in <path>
        const:<path>        fixed to the matrix in <path>
        pwc:<path>:<s>      piecewise constant on the groups listed in <path>
        circ:<s> | toep:<s> | hank:<s>
        diag | triu | tril
    """
    from . import io

    shape = (int(shape[0]), int(shape[1]))
    kind, _, arg = text.strip().partition(":")
    kind = kind.lower()
    try:
        if kind == "sp":
            return GlobalSparsity(shape, int(arg))
        if kind == "spcol":
            return PerColumnSparsity(shape, int(arg))
        if kind == "sprow":
            return PerRowSparsity(shape, int(arg))
        if kind == "splincol":
            return RowColSparsity(shape, int(arg))
        if kind == "supp":
            return FixedSupport(shape, io.read_matrix(arg) != 0)
        if kind == "const":
            c = Fixed(io.read_matrix(arg))
            if c.shape != shape:
                raise ValueError(f"const matrix has shape {c.shape}, expected {shape}")
            return c
        if kind == "pwc":
            path, _, s = arg.rpartition(":")
            return PiecewiseConstantSparse(shape, io.read_groups(path), int(s))
        if kind == "circ":
            if shape[0] != shape[1]:
                raise ValueError("circulant structure needs a square factor")
            return PiecewiseConstantSparse(shape, circulant_groups(shape[0]), int(arg))
        if kind == "toep":
            return PiecewiseConstantSparse(shape, toeplitz_groups(*shape), int(arg))
        if kind == "hank":
            return PiecewiseConstantSparse(shape, hankel_groups(*shape), int(arg))
        if kind == "diag":
            return Diagonal(shape)
        if kind in ("triu", "tril"):
            return Triangular(shape, upper=kind == "triu")
    except (TypeError, ValueError) as exc:
        raise ValueError(f"bad constraint {text!r}: {exc}") from None
    raise ValueError(f"unknown constraint kind {kind!r} in {text!r}")
