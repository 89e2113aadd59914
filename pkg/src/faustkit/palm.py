"""PALM for multi-layer sparse approximation (palm4MSA).

Minimizes ``0.5 * ||A - lam * S_J ... S_1||_F^2`` with each ``S_j``
constrained to a :class:`~faustkit.projections.ConstraintSet`. Each sweep
takes one projected gradient step per factor, ``j = 1 .. J`` (input side
first), with step ``1 / ((1 + alpha) * lam^2 ||L||_2^2 ||R||_2^2)``, then
solves for ``lam`` in closed form.

Factor lists in this module are in index order ``[S_1, ..., S_J]``:
``factors[0]`` multiplies the input. :class:`~faustkit.sparse.FaustOperator`
stores them the other way round.
"""

from __future__ import annotations

import csv
import time
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .linalg import ConvergenceWarning, NumericalError, spectral_norm
from .projections import ConstraintSet, Fixed
from .sparse import FaustOperator


@dataclass
class PalmConfig:
    """Solver settings.

    ``stop_threshold`` enables an early stop when the objective decreases by
    less than this amount over ``stop_window`` sweeps; ``None`` runs all
    ``max_iter`` sweeps.
    """

    max_iter: int = 50
    step_margin: float = 1e-3
    spectral_tol: float = 1e-9
    stop_threshold: float | None = None
    stop_window: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not self.step_margin > 0:
            raise ValueError("step_margin must be positive")


@dataclass
class PalmState:
    lam: float
    factors: list[np.ndarray]
    iteration: int = 0


@dataclass
class IterationRecord:
    stage: str
    iteration: int
    objective: float
    lam: float
    nnz: tuple[int, ...]


@dataclass
class RunTrace:
    """Per-sweep objective, scale and factor sparsity, plus per-level summaries."""

    records: list[IterationRecord] = field(default_factory=list)
    levels: list[dict] = field(default_factory=list)
    initial_objective: float | None = None
    elapsed: float = 0.0

    def objectives(self, stage: str | None = None) -> list[float]:
        return [r.objective for r in self.records if stage is None or r.stage == stage]

    def stages(self) -> list[str]:
        seen = []
        for r in self.records:
            if r.stage not in seen:
                seen.append(r.stage)
        return seen

    def extend(self, other: RunTrace) -> None:
        self.records.extend(other.records)
        self.levels.extend(other.levels)

    def write_csv(self, path) -> None:
        from .io import atomic_write

        with atomic_write(path) as fh:
            w = csv.writer(fh)
            w.writerow(["stage", "iteration", "objective", "lambda", "nnz"])
            for r in self.records:
                w.writerow([r.stage, r.iteration, repr(r.objective), repr(r.lam),
                            ";".join(str(n) for n in r.nnz)])


def _product(mats: Sequence[np.ndarray]) -> np.ndarray | None:
    """``mats[-1] @ ... @ mats[0]``; ``None`` for an empty list (identity)."""
    out = None
    for m in mats:
        out = m if out is None else m @ out
    return out


def _sandwich(L, S, R):
    out = S if R is None else S @ R
    return out if L is None else L @ out


def objective(A, lam: float, factors: Sequence[np.ndarray]) -> float:
    """Data-fidelity term ``0.5 * ||A - lam * S_J ... S_1||_F^2``."""
    A = np.asarray(A, dtype=np.float64)
    prod = _product([np.asarray(f, dtype=np.float64) for f in factors])
    if prod.shape != A.shape:
        raise ValueError(f"product shape {prod.shape} does not match {A.shape}")
    return 0.5 * float(np.sum((A - lam * prod) ** 2))


def gradient_factor(L, S, R, lam: float, A) -> np.ndarray:
    """Gradient of ``0.5 * ||A - lam * L S R||_F^2`` with respect to ``S``.

    ``L`` or ``R`` may be ``None`` for an identity.
    """
    S = np.asarray(S, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    resid = lam * _sandwich(L, S, R) - A
    if resid.shape != A.shape:
        raise ValueError(f"L S R has shape {resid.shape}, expected {A.shape}")
    g = resid if L is None else L.T @ resid
    g = g if R is None else g @ R.T
    return lam * g


def _norm2(M, tol, seed) -> float:
    if M is None:
        return 1.0
    if not np.any(M):
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        sigma, converged, _ = spectral_norm(M, tol=tol, seed=seed, return_info=True)
    if not converged:
        # clustered top singular values; the power estimate is a lower bound,
        # so take the exact value to keep the step safe
        sigma = float(np.linalg.norm(M, 2))
    return sigma


def lipschitz_modulus(L, R, lam: float, tol: float = 1e-9, seed: int = 0) -> float:
    """``lam^2 ||L||_2^2 ||R||_2^2``, the gradient's Lipschitz constant in ``S``.

    Norms come from power iteration, or from an SVD when it fails to converge.
    """
    return lam**2 * _norm2(L, tol, seed) ** 2 * _norm2(R, tol, seed) ** 2


def update_lambda(A, A_hat) -> float:
    """Least-squares scale ``<A, A_hat> / <A_hat, A_hat>``."""
    A_hat = np.asarray(A_hat, dtype=np.float64)
    denom = float(np.sum(A_hat * A_hat))
    if denom == 0.0:
        raise ValueError("cannot fit a scale to an all-zero product")
    return float(np.sum(np.asarray(A) * A_hat)) / denom


def default_init(constraints: Sequence[ConstraintSet]) -> PalmState:
    """``lam = 1``, ``S_1 = 0`` and rectangular identities elsewhere.

    Fixed factors start at their frozen value.
    """
    factors = []
    for j, c in enumerate(constraints):
        if isinstance(c, Fixed):
            factors.append(c.matrix.copy())
        elif j == 0:
            factors.append(np.zeros(c.shape))
        else:
            factors.append(np.eye(*c.shape))
    return PalmState(1.0, factors)


def check_chain(A_shape, constraints: Sequence[ConstraintSet]) -> None:
    if not constraints:
        raise ValueError("need at least one constraint set")
    shapes = [tuple(c.shape) for c in constraints]
    for lo, hi in zip(shapes, shapes[1:]):
        if hi[1] != lo[0]:
            raise ValueError(f"constraint shapes do not chain: {lo} then {hi}")
    if (shapes[-1][0], shapes[0][1]) != tuple(A_shape):
        raise ValueError(
            f"constraints describe a {shapes[-1][0]}x{shapes[0][1]} product, "
            f"input is {A_shape[0]}x{A_shape[1]}")


def palm_iterate(A, constraints: Sequence[ConstraintSet], state: PalmState,
                 config: PalmConfig, trace: RunTrace | None = None,
                 stage: str = "palm") -> PalmState:
    """Run the sweeps in place on a copy of ``state`` and return the new state."""
    A = np.asarray(A, dtype=np.float64)
    check_chain(A.shape, constraints)
    J = len(constraints)
    lam = float(state.lam)
    S = [np.array(f, dtype=np.float64) for f in state.factors]
    if len(S) != J:
        raise ValueError(f"{len(S)} initial factors for {J} constraints")
    for j, (f, c) in enumerate(zip(S, constraints)):
        if f.shape != tuple(c.shape):
            raise ValueError(f"initial factor {j + 1} has shape {f.shape}, expected {c.shape}")
        if isinstance(c, Fixed):
            S[j] = c.matrix
    if trace is not None and trace.initial_objective is None:
        trace.initial_objective = objective(A, lam, S)
    alpha = config.step_margin
    history = []
    for it in range(config.max_iter):
        # products of the factors still at the previous sweep, left of each j
        left: list[np.ndarray | None] = [None] * J
        acc = None
        for j in range(J - 1, -1, -1):
            left[j] = acc
            acc = S[j] if acc is None else acc @ S[j]
        R = None
        for j in range(J):
            c = constraints[j]
            if not isinstance(c, Fixed):
                L = left[j]
                lip = lipschitz_modulus(L, R, lam, tol=config.spectral_tol, seed=config.seed)
                if lip > 0.0 and np.isfinite(lip):
                    grad = gradient_factor(L, S[j], R, lam, A)
                    S[j] = c.project(S[j] - grad / ((1.0 + alpha) * lip))
                else:
                    # gradient vanishes identically; only enforce feasibility
                    S[j] = c.project(S[j])
                if not np.all(np.isfinite(S[j])):
                    raise NumericalError(f"non-finite entries in factor {j + 1} at sweep {it + 1}")
            R = S[j] if R is None else S[j] @ R
        if np.any(R):
            lam = update_lambda(A, R)
        if not np.isfinite(lam):
            raise NumericalError(f"non-finite scale at sweep {it + 1}")
        obj = 0.5 * float(np.sum((A - lam * R) ** 2))
        history.append(obj)
        if trace is not None:
            trace.records.append(IterationRecord(
                stage, it + 1, obj, lam, tuple(int(np.count_nonzero(f)) for f in S)))
        w = config.stop_window
        if (config.stop_threshold is not None and len(history) > w
                and history[-w - 1] - history[-1] < config.stop_threshold):
            break
    return PalmState(lam, S, state.iteration + len(history))


def to_faust(lam: float, factors: Sequence[np.ndarray]) -> FaustOperator:
    """Pack index-ordered dense factors into a :class:`FaustOperator`."""
    return FaustOperator.from_dense_factors(list(reversed(factors)), lam)


def palm4msa(A, constraints: Sequence[ConstraintSet], init: PalmState | str = "default",
             config: PalmConfig | None = None) -> tuple[FaustOperator, RunTrace]:
    """Factorize ``A`` into ``len(constraints)`` constrained factors.

    ``constraints`` are in index order (``constraints[0]`` for ``S_1``, the
    input side). ``init`` is ``"default"`` or a :class:`PalmState` with
    factors in the same order.
    """
    config = config or PalmConfig()
    if isinstance(init, str):
        if init != "default":
            raise ValueError(f"unknown init {init!r}")
        init = default_init(constraints)
    trace = RunTrace()
    t0 = time.perf_counter()
    state = palm_iterate(A, constraints, init, config, trace)
    trace.elapsed = time.perf_counter() - t0
    return to_faust(state.lam, state.factors), trace
