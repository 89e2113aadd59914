"""Dictionary learning with FAuST dictionaries and patch-based denoising.

The learned dictionary is ``lam * S_J ... S_1`` with ``S_1`` of size
``m x n`` and the other factors ``m x m``. Coefficients come from OMP against
the dictionary as it is, without renormalizing its columns (so atoms with a
larger norm are preferred), unless ``normalize_atoms`` is set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hierarchical import FactorizationPlan, make_schedule_plan
from .palm import PalmConfig, PalmState, RunTrace, default_init, palm_iterate, to_faust
from .projections import Fixed
from .solvers import batch_omp
from .sparse import FaustOperator


@dataclass
class Codebook:
    D: np.ndarray
    Gamma: np.ndarray
    errors: list[float]


def _colnorm(D):
    norms = np.linalg.norm(D, axis=0)
    return D / np.where(norms > 0, norms, 1.0)


def sparse_code(D, Y, t: int, normalize_atoms: bool = False) -> np.ndarray:
    """Column-wise OMP codes of ``Y`` in ``D`` with at most ``t`` atoms each."""
    D = np.asarray(D, dtype=np.float64)
    if not normalize_atoms:
        return batch_omp(D, Y, t)
    norms = np.linalg.norm(D, axis=0)
    safe = np.where(norms > 0, norms, 1.0)
    return batch_omp(D / safe, Y, t) / safe[:, None]


def overcomplete_dct(p: int, n: int) -> np.ndarray:
    """Separable overcomplete DCT for ``p x p`` patches, ``p^2 x n``.

    Built from a ``p x q`` 1-d DCT with ``q = ceil(sqrt(n))`` (non-constant
    atoms made zero-mean), Kronecker-squared and cut to the first ``n``
    atoms. Columns have unit norm.
    """
    q = math.ceil(math.sqrt(n))
    x = np.arange(p)
    base = np.zeros((p, q))
    for k in range(q):
        v = np.cos(x * k * np.pi / q)
        if k > 0:
            v = v - v.mean()
        base[:, k] = v / np.linalg.norm(v)
    return np.kron(base, base)[:, :n]


def ksvd_like_init(Y, n: int, t: int, iters: int = 10, seed: int = 0,
                   D_init=None) -> Codebook:
    """K-SVD: alternate OMP coding with per-atom rank-1 updates.

    Starts from ``D_init`` or from ``n`` random training columns. An atom used
    by no code is replaced by the worst-represented training column. A new
    code only replaces the previous one when it fits at least as well, which
    keeps ``||Y - D Gamma||_F`` nonincreasing. ``errors`` holds that value
    after every round.
    """
    Y = np.asarray(Y, dtype=np.float64)
    m, L = Y.shape
    if n < 1 or t < 1:
        raise ValueError("n and t must be positive")
    t = min(t, n)
    rng = np.random.default_rng(seed)
    if D_init is not None:
        D = np.array(D_init, dtype=np.float64)
        if D.shape != (m, n):
            raise ValueError(f"D_init has shape {D.shape}, expected {(m, n)}")
    else:
        pick = rng.choice(L, size=min(n, L), replace=False)
        D = np.concatenate([Y[:, pick], rng.standard_normal((m, n - len(pick)))], axis=1)
    dead = np.linalg.norm(D, axis=0) == 0
    D[:, dead] = rng.standard_normal((m, int(dead.sum())))
    D = _colnorm(D)
    Gamma = None
    errors = []
    for _ in range(iters):
        G = batch_omp(D, Y, t)
        if Gamma is not None:
            old = np.sum((Y - D @ Gamma) ** 2, axis=0)
            new = np.sum((Y - D @ G) ** 2, axis=0)
            keep_old = old < new
            G[:, keep_old] = Gamma[:, keep_old]
        Gamma = G
        E = Y - D @ Gamma
        taken = set()
        for k in range(n):
            users = np.flatnonzero(Gamma[k])
            if len(users) == 0:
                resid = np.sum(E * E, axis=0)
                resid[list(taken)] = -1.0
                worst = int(np.argmax(resid))
                taken.add(worst)
                if np.linalg.norm(Y[:, worst]) > 0:
                    D[:, k] = Y[:, worst] / np.linalg.norm(Y[:, worst])
                continue
            Ek = E[:, users] + np.outer(D[:, k], Gamma[k, users])
            U, s, Vt = np.linalg.svd(Ek, full_matrices=False)
            D[:, k] = U[:, 0]
            Gamma[k, users] = s[0] * Vt[0]
            E[:, users] = Ek - np.outer(D[:, k], Gamma[k, users])
        errors.append(float(np.linalg.norm(Y - D @ Gamma)))
    if Gamma is None:
        Gamma = batch_omp(D, Y, t)
    return Codebook(D, Gamma, errors)


def hierarchical_dictionary_learn(Y, D0, Gamma0, plan: FactorizationPlan, t: int = 5,
                                  inner: PalmConfig | None = None,
                                  global_: PalmConfig | None = None,
                                  normalize_atoms: bool = False):
    """Factorize a dictionary while keeping it fitted to the data.

    Level ``l`` splits the residual ``T_{l-1}`` in two, refines
    ``lam * T_l S_l ... S_1 Gamma`` against ``Y`` with ``Gamma`` held fixed,
    then recodes ``Y`` by OMP in the current dictionary ``lam * T_l S_l ...
    S_1``, keeping a column's previous code when that fits it better. Returns ``(dictionary, Gamma, trace)``; ``trace.levels`` records
    ``data_error = ||Y - lam D Gamma||_F`` after each level.
    """
    Y = np.asarray(Y, dtype=np.float64)
    D0 = np.asarray(D0, dtype=np.float64)
    Gamma = np.asarray(Gamma0, dtype=np.float64)
    if plan.side != "right":
        raise ValueError("dictionary learning factorizes from the right only")
    plan.check(D0.shape)
    if Gamma.shape != (D0.shape[1], Y.shape[1]) or Y.shape[0] != D0.shape[0]:
        raise ValueError("need Y (m x L), D0 (m x n) and Gamma0 (n x L)")
    inner = inner or PalmConfig()
    global_ = global_ or PalmConfig()
    trace = RunTrace()
    T = D0
    lam = 1.0
    found: list[np.ndarray] = []
    for l, (res_c, fac_c) in enumerate(plan.levels, 1):
        pair = [fac_c, res_c]
        start = default_init(pair)
        if plan.split_init == "zero-residual":
            start.factors = [np.eye(*fac_c.shape), np.zeros(res_c.shape)]
        split = palm_iterate(T, pair, start, inner, trace, stage=f"split{l}")
        F1, F2 = split.factors
        fixed = Fixed(Gamma)
        constraints = [fixed] + [fac for _, fac in plan.levels[:l]] + [res_c]
        state = PalmState(lam, [fixed.matrix] + found + [F1, split.lam * F2])
        refined = palm_iterate(Y, constraints, state, global_, trace, stage=f"global{l}")
        lam = refined.lam
        found, T = refined.factors[1:-1], refined.factors[-1]
        D = to_faust(lam, found + [T])
        Dd = D.toarray()
        G = sparse_code(Dd, Y, t, normalize_atoms)
        # a column keeps its previous code when OMP does worse with it
        old = np.sum((Y - Dd @ Gamma) ** 2, axis=0)
        new = np.sum((Y - Dd @ G) ** 2, axis=0)
        G[:, old < new] = Gamma[:, old < new]
        Gamma = G
        trace.levels.append({
            "level": l,
            "data_error": float(np.linalg.norm(Y - Dd @ Gamma)),
            "rc": D.s_tot / (D0.shape[0] * D0.shape[1]),
            "s_tot": D.s_tot,
            "lambda": lam,
        })
    return to_faust(lam, found + [T]), Gamma, trace


# ---------------------------------------------------------------- patches

def patch_positions(shape, p: int, step: int = 1) -> np.ndarray:
    """Top-left corners of all ``p x p`` patches on a grid with ``step``.

    The last row and column of patches are always included so every pixel
    is covered.
    """
    h, w = shape
    if h < p or w < p:
        raise ValueError(f"image {h}x{w} is smaller than the {p}x{p} patch")
    rows = list(range(0, h - p + 1, step))
    cols = list(range(0, w - p + 1, step))
    if rows[-1] != h - p:
        rows.append(h - p)
    if cols[-1] != w - p:
        cols.append(w - p)
    return np.array([(r, c) for r in rows for c in cols], dtype=np.int64)


def extract_patches(img, p: int, positions) -> np.ndarray:
    """Patches as columns (``p^2 x N``), each flattened row by row."""
    img = np.asarray(img, dtype=np.float64)
    windows = np.lib.stride_tricks.sliding_window_view(img, (p, p))
    pos = np.asarray(positions)
    return windows[pos[:, 0], pos[:, 1]].reshape(len(pos), p * p).T.copy()


def reconstruct_from_patches(patches, positions, shape, p: int) -> np.ndarray:
    """Average overlapping patches back into an image."""
    acc = np.zeros(shape)
    weight = np.zeros(shape)
    for (r, c), col in zip(np.asarray(positions), np.asarray(patches).T):
        acc[r:r + p, c:c + p] += col.reshape(p, p)
        weight[r:r + p, c:c + p] += 1.0
    if np.any(weight == 0):
        raise ValueError("patches do not cover the image")
    return acc / weight


def psnr(reference, img, peak: float = 255.0) -> float:
    """``10 log10(peak^2 / MSE)``; ``inf`` for identical images."""
    err = np.mean((np.asarray(reference, dtype=np.float64) - np.asarray(img, dtype=np.float64)) ** 2)
    return float("inf") if err == 0 else float(10.0 * np.log10(peak**2 / err))


@dataclass
class DenoiseResult:
    image: np.ndarray
    dictionary: FaustOperator | np.ndarray
    psnr_in: float | None
    psnr_out: float | None
    rc: float
    s_tot: int
    trace: RunTrace | None = None


def default_denoise_plan(m: int, n: int, J: int = 4, s_over_m: int = 3,
                         rho: float = 0.5) -> FactorizationPlan:
    """Schedule with ``s = s_over_m * m``, ``k = s_over_m`` and ``P = m^2``."""
    return make_schedule_plan(m, n, J, s_over_m, s_over_m * m, rho, float(m * m))


def denoise_image(noisy, n_atoms: int = 128, t: int = 5, plan: FactorizationPlan | None = None,
                  patch: int = 8, n_patches: int = 10000, ksvd_iters: int = 10,
                  clean=None, seed: int = 0, method: str = "faust", remove_mean: bool = True,
                  normalize_atoms: bool = False, inner: PalmConfig | None = None,
                  global_: PalmConfig | None = None) -> DenoiseResult:
    """Learn a dictionary on random noisy patches and denoise every patch.

    ``method`` is ``"faust"`` (K-SVD start, then hierarchical factorization),
    ``"dense"`` (the K-SVD dictionary itself) or ``"dct"`` (overcomplete
    DCT). All overlapping patches are coded with ``t`` atoms and averaged.
    PSNR values are reported when ``clean`` is given.
    """
    noisy = np.asarray(noisy, dtype=np.float64)
    if noisy.ndim != 2:
        raise ValueError("expected a grayscale image")
    m = patch * patch
    positions = patch_positions(noisy.shape, patch)
    rng = np.random.default_rng(seed)
    take = rng.choice(len(positions), size=min(n_patches, len(positions)), replace=False)
    Y = extract_patches(noisy, patch, positions[take])
    if remove_mean:
        Y -= Y.mean(axis=0)
    trace = None
    if method == "dct":
        D = overcomplete_dct(patch, n_atoms)
        dictionary, dense_D = D, D
        s_tot = int(np.count_nonzero(D))
    elif method in ("dense", "faust"):
        book = ksvd_like_init(Y, n_atoms, t, ksvd_iters, seed=seed,
                              D_init=overcomplete_dct(patch, n_atoms))
        if method == "dense":
            dictionary, dense_D = book.D, book.D
            s_tot = int(np.count_nonzero(book.D))
        else:
            plan = plan or default_denoise_plan(m, n_atoms)
            dictionary, _, trace = hierarchical_dictionary_learn(
                Y, book.D, book.Gamma, plan, t, inner, global_, normalize_atoms)
            dense_D = dictionary.toarray()
            s_tot = dictionary.s_tot
    else:
        raise ValueError(f"unknown method {method!r}")
    P = extract_patches(noisy, patch, positions)
    means = P.mean(axis=0) if remove_mean else np.zeros(P.shape[1])
    P -= means
    G = sparse_code(dense_D, P, t, normalize_atoms and method == "faust")
    out = reconstruct_from_patches(dense_D @ G + means, positions, noisy.shape, patch)
    rc = s_tot / (m * n_atoms)
    p_in = p_out = None
    if clean is not None:
        p_in, p_out = psnr(clean, noisy), psnr(clean, out)
    return DenoiseResult(out, dictionary, p_in, p_out, rc, s_tot, trace)
