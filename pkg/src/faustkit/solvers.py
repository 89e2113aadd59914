"""Sparse recovery: OMP, batch OMP and IHT over dense or FAuST operators.

Atoms are used as they are, without column normalization, so an atom with a
larger norm is favoured by the greedy selection. Ties in correlation go to the
lowest column index.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import kernels
from .linalg import NumericalError, spectral_norm
from .projections import top_k_select
from .sparse import FaustOperator


class LinearOp:
    """Uniform view of a dense matrix or a :class:`FaustOperator`."""

    def __init__(self, op):
        if isinstance(op, LinearOp):
            op = op.op
        if isinstance(op, FaustOperator):
            self.op = op
        else:
            a = np.asarray(op, dtype=np.float64)
            if a.ndim != 2:
                raise ValueError("operator must be 2-d")
            self.op = a
        self._norm = None

    @property
    def is_faust(self) -> bool:
        return isinstance(self.op, FaustOperator)

    @property
    def shape(self) -> tuple[int, int]:
        return tuple(self.op.shape)

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return self.op.apply(x) if self.is_faust else self.op @ x

    def apply_transpose(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        return self.op.apply_transpose(y) if self.is_faust else self.op.T @ y

    def column(self, j: int) -> np.ndarray:
        if self.is_faust:
            e = np.zeros(self.shape[1])
            e[j] = 1.0
            return self.op.apply(e)
        return self.op[:, j].copy()

    def toarray(self) -> np.ndarray:
        return self.op.toarray() if self.is_faust else self.op

    def column_norms(self) -> np.ndarray:
        return np.linalg.norm(self.toarray(), axis=0)

    def norm(self) -> float:
        """Spectral norm (power iteration, cached)."""
        if self._norm is None:
            a = self.toarray()
            self._norm = spectral_norm(a) if np.any(a) else 0.0
        return self._norm


def _solve_ls(Phi: np.ndarray, y: np.ndarray) -> np.ndarray:
    # normal equations; least-norm fallback when the Gram matrix is singular
    G = Phi.T @ Phi
    b = Phi.T @ y
    try:
        c, low = scipy.linalg.cho_factor(G, lower=True, check_finite=False)
        if np.min(np.abs(np.diag(c))) ** 2 > 1e-12 * np.max(np.diag(G)):
            return scipy.linalg.cho_solve((c, low), b, check_finite=False)
    except np.linalg.LinAlgError:
        pass
    return np.linalg.lstsq(Phi, y, rcond=None)[0]


def omp(op, y, t: int, tol: float = 0.0, return_support: bool = False):
    """Orthogonal matching pursuit with at most ``t`` atoms.

    Each step picks the column with the largest ``|<d_j, r>|`` and refits all
    selected coefficients by least squares. Stops early when the largest
    correlation is at most ``tol * ||y||`` or when the residual vanishes.

    Returns the length-``n`` coefficient vector, plus the support in selection
    order if ``return_support``.
    """
    op = LinearOp(op)
    y = np.asarray(y, dtype=np.float64).ravel()
    m, n = op.shape
    if len(y) != m:
        raise ValueError(f"y has length {len(y)}, operator has {m} rows")
    if not 1 <= t <= n:
        raise ValueError(f"t={t} outside [1, {n}]")
    support: list[int] = []
    cols: list[np.ndarray] = []
    x = np.zeros(0)
    r = y.copy()
    ynorm = np.linalg.norm(y)
    while len(support) < t:
        corr = np.abs(op.apply_transpose(r))
        best = int(np.argmax(corr))
        if corr[best] <= tol * ynorm or corr[best] == 0.0 or best in support:
            break
        support.append(best)
        cols.append(op.column(best))
        Phi = np.column_stack(cols)
        x = _solve_ls(Phi, y)
        r = y - Phi @ x
    gamma = np.zeros(n)
    gamma[support] = x
    if return_support:
        return gamma, support
    return gamma


def batch_omp(D, Y, t: int, tol: float = 0.0) -> np.ndarray:
    """OMP on every column of ``Y`` with a shared Gram matrix.

    Cholesky-updated OMP run by the compiled kernel when available. ``tol``
    stops a column once its largest correlation falls to
    ``tol * sqrt(||y||^2 * max_j ||d_j||^2)``. Returns ``Gamma`` (n x L).
    """
    D = np.ascontiguousarray(LinearOp(D).toarray(), dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    m, n = D.shape
    if Y.shape[0] != m:
        raise ValueError(f"Y has {Y.shape[0]} rows, dictionary has {m}")
    if not 1 <= t <= n:
        raise ValueError(f"t={t} outside [1, {n}]")
    L = Y.shape[1]
    gram = np.ascontiguousarray(D.T @ D)
    corr = np.ascontiguousarray((D.T @ Y).T)
    norms2 = np.ascontiguousarray(np.sum(Y * Y, axis=0))
    supports = np.zeros((L, t), dtype=np.int64)
    coefs = np.zeros((L, t))
    counts = np.zeros(L, dtype=np.int64)
    kernels.batch_omp(gram, corr, norms2, t, float(tol), supports, coefs, counts)
    Gamma = np.zeros((n, L))
    mask = np.arange(t)[None, :] < counts[:, None]
    cols = np.nonzero(mask)[0]
    Gamma[supports[mask], cols] = coefs[mask]
    return Gamma


def hard_threshold(v, t: int) -> np.ndarray:
    """Keep the ``t`` largest-magnitude entries (ties to the lower index)."""
    v = np.asarray(v, dtype=np.float64)
    out = np.zeros_like(v)
    idx = top_k_select(v, min(t, len(v)))
    out[idx] = v[idx]
    return out


def iht(op, y, t: int, steps: int = 100, mu: float | None = None, callback=None) -> np.ndarray:
    """Iterative hard thresholding ``g <- H_t(g + mu * op^T (y - op g))``.

    ``mu`` defaults to ``1 / ||op||_2^2``. ``callback(i, g)`` is called after
    every step. Raises :class:`NumericalError` if the iterate norm exceeds
    ``1e12``.
    """
    op = LinearOp(op)
    y = np.asarray(y, dtype=np.float64).ravel()
    if t < 1:
        raise ValueError("t must be at least 1")
    if mu is None:
        nrm = op.norm()
        mu = 1.0 / nrm**2 if nrm > 0 else 1.0
    g = np.zeros(op.shape[1])
    for i in range(steps):
        g = hard_threshold(g + mu * op.apply_transpose(y - op.apply(g)), t)
        if not np.all(np.isfinite(g)) or np.linalg.norm(g) > 1e12:
            raise NumericalError(f"IHT diverged at step {i + 1}")
        if callback is not None:
            callback(i, g)
    return g


@dataclass
class LocalizationReport:
    """Rows of ``(trial, label, truth, recovered, overlap, distance)``."""

    rows: list[tuple] = field(default_factory=list)
    labels: list[str] = field(default_factory=list)

    def recovery_rate(self, label: str) -> float:
        """Fraction of trials where the whole planted support was found."""
        hits = [r[4] == len(r[2]) for r in self.rows if r[1] == label]
        return float(np.mean(hits)) if hits else float("nan")

    def mean_overlap(self, label: str) -> float:
        return float(np.mean([r[4] for r in self.rows if r[1] == label]))

    def supports(self, label: str) -> list[tuple[int, ...]]:
        return [r[3] for r in self.rows if r[1] == label]

    def summary(self) -> list[tuple[str, float, float]]:
        return [(lab, self.recovery_rate(lab), self.mean_overlap(lab)) for lab in self.labels]

    def write_csv(self, path) -> None:
        from .io import atomic_write

        with atomic_write(path) as fh:
            w = csv.writer(fh)
            w.writerow(["trial", "operator", "truth", "recovered", "overlap", "distance"])
            for trial, label, truth, rec, overlap, dist in self.rows:
                w.writerow([trial, label, ";".join(map(str, truth)), ";".join(map(str, rec)),
                            overlap, "" if dist is None else repr(dist)])


def _distance(coords, truth, rec):
    # mean distance from each true source to the nearest recovered one
    if coords is None:
        return None
    if not rec:
        return float("inf")
    d = np.linalg.norm(coords[list(truth)][:, None, :] - coords[list(rec)][None, :, :], axis=2)
    return float(np.mean(d.min(axis=1)))


def localization_experiment(M, Fs, trials: int = 500, seed: int = 0, labels=None,
                            coords=None, sparsity: int = 2) -> LocalizationReport:
    """Plant ``sparsity`` sources, measure ``y = M g`` and recover with OMP.

    Recovery runs once with ``M`` itself (label ``"dense"``) and once with
    every operator in ``Fs``. Each trial draws its own generator from the
    master ``seed``. ``coords`` (n x d) adds a Euclidean distance column.
    """
    M = np.asarray(M, dtype=np.float64)
    n = M.shape[1]
    labels = list(labels) if labels is not None else [f"faust{i}" for i in range(len(Fs))]
    if len(labels) != len(Fs):
        raise ValueError("one label per operator")
    ops = [("dense", LinearOp(M))] + [(lab, LinearOp(F)) for lab, F in zip(labels, Fs)]
    for lab, op in ops:
        if op.shape != M.shape:
            raise ValueError(f"operator {lab} has shape {op.shape}, expected {M.shape}")
    coords = None if coords is None else np.asarray(coords, dtype=np.float64)
    report = LocalizationReport(labels=[lab for lab, _ in ops])
    for trial, ss in enumerate(np.random.SeedSequence(seed).spawn(trials)):
        rng = np.random.default_rng(ss)
        truth = tuple(sorted(rng.choice(n, size=sparsity, replace=False).tolist()))
        g = np.zeros(n)
        g[list(truth)] = rng.standard_normal(sparsity)
        y = M @ g
        for lab, op in ops:
            _, sup = omp(op, y, sparsity, return_support=True)
            rec = tuple(sorted(sup))
            overlap = len(set(rec) & set(truth))
            report.rows.append((trial, lab, truth, rec, overlap, _distance(coords, truth, rec)))
    return report
