"""Hierarchical factorization: peel one sparse factor at a time, then refine.

At level ``l`` the current residual ``T_{l-1}`` is split into
``lam' * F2 @ F1`` by a two-factor PALM run from the default start; ``F1``
becomes ``S_l`` and ``lam' * F2`` the new residual. All factors found so far
are then refined jointly against the input by PALM started from their
current values. After ``J - 1`` levels the residual is the last factor.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .palm import PalmConfig, PalmState, RunTrace, default_init, palm_iterate, to_faust
from .projections import ConstraintSet, GlobalSparsity, PerColumnSparsity, RowColSparsity
from .sparse import FaustOperator, relative_complexity, relative_error


@dataclass
class FactorizationPlan:
    """Per-level ``(residual_constraint, factor_constraint)`` pairs.

    For ``side="right"`` level ``l`` splits ``T_{l-1} ~= T_l @ S_l``. For
    ``side="left"`` the constraints describe ``T_{l-1} ~= S_l @ T_l`` and the
    run is carried out on the transpose. ``stop_error`` optionally ends the
    hierarchy early once the relative error after a refinement exceeds it.

    ``split_init`` selects the start of each two-factor split: ``"default"``
    zeroes the peeled factor and sets the residual to the identity;
    ``"zero-residual"`` does the opposite.
    """

    levels: list[tuple[ConstraintSet, ConstraintSet]]
    side: str = "right"
    stop_error: float | None = None
    split_init: str = "default"
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.levels:
            raise ValueError("a plan needs at least one level (J >= 2)")
        if self.side not in ("right", "left"):
            raise ValueError(f"side must be 'right' or 'left', got {self.side!r}")
        if self.split_init not in ("default", "zero-residual"):
            raise ValueError(f"unknown split_init {self.split_init!r}")

    @property
    def J(self) -> int:
        return len(self.levels) + 1

    def transposed(self) -> FactorizationPlan:
        return FactorizationPlan(
            [(r.transposed(), f.transposed()) for r, f in self.levels],
            side="right" if self.side == "left" else "left",
            stop_error=self.stop_error, split_init=self.split_init, notes=dict(self.notes))

    def check(self, shape) -> None:
        m, n = shape
        cols = n
        for l, (res, fac) in enumerate(self.levels, 1):
            if fac.shape[1] != cols:
                raise ValueError(f"level {l}: factor has {fac.shape[1]} columns, expected {cols}")
            if res.shape[1] != fac.shape[0]:
                raise ValueError(f"level {l}: residual {res.shape} cannot multiply factor {fac.shape}")
            if res.shape[0] != m:
                raise ValueError(f"level {l}: residual has {res.shape[0]} rows, expected {m}")
            cols = res.shape[1]


def _level_summary(A, lam, factors, level, t0):
    F = to_faust(lam, factors)
    return {
        "level": level,
        "re": relative_error(A, F),
        "rc": relative_complexity(F, A),
        "s_tot": F.s_tot,
        "lambda": lam,
        "seconds": time.perf_counter() - t0,
    }


def _factorize_right(A, plan, inner, global_, trace):
    t0 = time.perf_counter()
    plan.check(A.shape)
    T = A
    lam = 1.0
    found: list[np.ndarray] = []
    best = None
    for l, (res_c, fac_c) in enumerate(plan.levels, 1):
        pair = [fac_c, res_c]
        start = default_init(pair)
        if plan.split_init == "zero-residual":
            start.factors = [np.eye(*fac_c.shape), np.zeros(res_c.shape)]
        split = palm_iterate(T, pair, start, inner, trace, stage=f"split{l}")
        F1, F2 = split.factors
        constraints = [fac for _, fac in plan.levels[:l]] + [res_c]
        state = PalmState(lam, found + [F1, split.lam * F2])
        refined = palm_iterate(A, constraints, state, global_, trace, stage=f"global{l}")
        lam = refined.lam
        found, T = refined.factors[:-1], refined.factors[-1]
        summary = _level_summary(A, lam, found + [T], l, t0)
        trace.levels.append(summary)
        if plan.stop_error is not None and summary["re"] > plan.stop_error and best is not None:
            return best
        best = (lam, found + [T])
    return best


def hierarchical_factorize(A, plan: FactorizationPlan, inner: PalmConfig | None = None,
                           global_: PalmConfig | None = None) -> tuple[FaustOperator, RunTrace]:
    """Run the hierarchical strategy; returns the operator and the full trace.

    ``trace.levels`` holds relative error and complexity after each level.
    """
    A = np.asarray(A, dtype=np.float64)
    inner = inner or PalmConfig()
    global_ = global_ or PalmConfig()
    trace = RunTrace()
    t0 = time.perf_counter()
    if plan.side == "left":
        lam, factors = _factorize_right(A.T, plan.transposed(), inner, global_, trace)
        F = to_faust(lam, factors).T
    else:
        lam, factors = _factorize_right(A, plan, inner, global_, trace)
        F = to_faust(lam, factors)
    trace.elapsed = time.perf_counter() - t0
    return F, trace


def make_hadamard_plan(n: int, structure: str = "rowcol") -> FactorizationPlan:
    """Constraints for reverse-engineering the ``n x n`` Hadamard transform.

    ``J = log2(n)`` factors. At level ``l`` the residual may hold
    ``n^2 / 2^l`` nonzeros and the peeled factor ``2n``.

    With ``structure="global"`` these are plain global budgets. From the
    default start every entry of the Hadamard matrix ties in magnitude and
    exact projections with a deterministic tie-break settle in a poor local
    minimum. ``structure="rowcol"`` (default) spreads the same counts as
    ``n / 2^l`` and ``2`` per row and column using :class:`RowColSparsity`
    and starts each split from a zero residual; this recovers the exact
    butterfly factorization.
    """
    if n < 2 or n & (n - 1):
        raise ValueError(f"n must be a power of two, got {n}")
    J = n.bit_length() - 1
    if J < 2:
        raise ValueError(f"n={n} gives a single factor; nothing to split")
    shape = (n, n)
    notes = {"kind": "hadamard", "n": n, "structure": structure,
             "residual_budgets": [n * n // 2**l for l in range(1, J)], "factor_budget": 2 * n}
    if structure == "global":
        levels = [(GlobalSparsity(shape, n * n // 2**l), GlobalSparsity(shape, 2 * n))
                  for l in range(1, J)]
        return FactorizationPlan(levels, notes=notes)
    if structure == "rowcol":
        levels = [(RowColSparsity(shape, n // 2**l), RowColSparsity(shape, 2))
                  for l in range(1, J)]
        return FactorizationPlan(levels, split_init="zero-residual", notes=notes)
    raise ValueError(f"unknown structure {structure!r}")


def geometric_budget(P: float, rho: float, level: int) -> int:
    # guard against values like 46.99999999 that are exact in decimal
    x = P * rho ** (level - 1)
    return int(math.floor(x + 1e-9 * max(1.0, abs(x))))


def make_schedule_plan(m: int, n: int, J: int, k: int, s: int, rho: float,
                       P: float) -> FactorizationPlan:
    """Schedule with a ``k``-sparse-column input factor (``m x n``), square
    ``m x m`` factors of global sparsity ``s`` and residual budgets
    ``floor(P * rho^(l-1))``.
    """
    if J < 2:
        raise ValueError("J must be at least 2")
    if not 0 < rho:
        raise ValueError("rho must be positive")
    levels = []
    for l in range(1, J):
        budget = geometric_budget(P, rho, l)
        if budget < 1:
            raise ValueError(f"residual budget at level {l} floors to {budget}")
        fac = PerColumnSparsity((m, n), k) if l == 1 else GlobalSparsity((m, m), s)
        levels.append((GlobalSparsity((m, m), budget), fac))
    return FactorizationPlan(levels, notes={"kind": "schedule", "m": m, "n": n, "J": J,
                                            "k": k, "s": s, "rho": rho, "P": P})
