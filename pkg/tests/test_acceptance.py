"""End-to-end acceptance checks; each test is tagged with its criterion name.

``pytest tests/test_acceptance.py -v`` prints one PASS/FAIL line per criterion
in the terminal summary.
"""

import time

import numpy as np
import pytest

from faustkit import (FaustOperator, FlopCounter, PalmConfig, SparseMatrix, faust_apply,
                      faust_apply_transpose, faust_to_dense, hierarchical_factorize,
                      relative_complexity, relative_error)
from faustkit.datasets import hadamard, planted_faust, test_image as bundled_image
from faustkit.dictlearn import denoise_image
from faustkit.hierarchical import make_hadamard_plan, make_schedule_plan
from faustkit.linalg import truncated_svd
from faustkit.palm import (gradient_factor, lipschitz_modulus, objective, palm4msa)
from faustkit.projections import GlobalSparsity, PerColumnSparsity
from faustkit.solvers import localization_experiment

from oracles import (PROJECTION_KINDS, brute_force_objective, finite_difference_gradient,
                     random_constraint)


@pytest.mark.criterion("hadamard-reverse-engineering")
@pytest.mark.parametrize("n", [8, 16, 32])
def test_hadamard(n):
    A = hadamard(n)
    t0 = time.perf_counter()
    F, _ = hierarchical_factorize(A, make_hadamard_plan(n))
    elapsed = time.perf_counter() - t0
    assert relative_error(A, F) <= 1e-6
    assert F.n_factors == int(np.log2(n))
    assert all(f.nnz <= 2 * n for f in F.factors)
    if n == 32:
        assert relative_complexity(F, A) == pytest.approx(320 / 1024)
    assert elapsed <= 60


@pytest.mark.criterion("projection-optimality")
def test_projection_oracle():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    count = 0
    worst = 0.0
    for i in range(1100):
        kind = PROJECTION_KINDS[i % len(PROJECTION_KINDS)]
        shape = tuple(int(x) for x in rng.integers(1, 5, 2))
        c = random_constraint(rng, shape, kind)
        U = rng.standard_normal(shape)
        S = c.project(U)
        assert c.contains(S)
        worst = max(worst, float(np.sum((S - U) ** 2)) - brute_force_objective(U, c))
        count += 1
    assert count >= 1000
    assert worst <= 1e-12
    assert time.perf_counter() - t0 <= 30


def _random_chain(rng):
    m, a, b, n = (int(x) for x in rng.integers(2, 7, 4))
    S3, S2, S1 = rng.standard_normal((m, a)), rng.standard_normal((a, b)), rng.standard_normal((b, n))
    A = rng.standard_normal((m, n))
    return S3, S2, S1, A, float(rng.uniform(0.5, 2.0))


@pytest.mark.criterion("palm-correctness")
def test_palm_gradient_finite_differences():
    rng = np.random.default_rng(7)
    for _ in range(100):
        S3, S2, S1, A, lam = _random_chain(rng)
        g = gradient_factor(S3, S2, S1, lam, A)
        fd = finite_difference_gradient(lambda X: objective(A, lam, [S1, X, S3]), S2)
        assert np.max(np.abs(g - fd)) <= 1e-5 * max(1.0, np.max(np.abs(g)))


@pytest.mark.criterion("palm-correctness")
def test_palm_lipschitz_pairs():
    rng = np.random.default_rng(8)
    for _ in range(1000):
        L, X, R, A, lam = _random_chain(rng)
        Y = rng.standard_normal(X.shape)
        lhs = np.linalg.norm(gradient_factor(L, X, R, lam, A) - gradient_factor(L, Y, R, lam, A))
        assert lhs <= lipschitz_modulus(L, R, lam) * np.linalg.norm(X - Y) * (1 + 1e-9)


@pytest.mark.criterion("palm-correctness")
def test_palm_monotone_and_lambda():
    for seed in range(50):
        rng = np.random.default_rng(seed)
        m, n = (int(x) for x in rng.integers(4, 12, 2))
        A = rng.standard_normal((m, n))
        cons = [GlobalSparsity((m, n), m * n // 2), PerColumnSparsity((m, m), 2),
                GlobalSparsity((m, m), 2 * m)]
        F, trace = palm4msa(A, cons, config=PalmConfig(max_iter=40, seed=seed))
        obj = [trace.initial_objective] + trace.objectives()
        assert all(b <= a + 1e-12 * abs(a) for a, b in zip(obj, obj[1:]))
        lam = F.scale
        base = FaustOperator(F.factors).toarray()
        f = 0.5 * np.sum((A - lam * base) ** 2)
        for t in (0.99, 1.01):
            assert 0.5 * np.sum((A - t * lam * base) ** 2) >= f


def _random_operator(rng):
    J = int(rng.integers(1, 5))
    dims = [int(x) for x in rng.integers(1, 65, J + 1)]
    factors = []
    for j in range(J):
        a = rng.standard_normal((dims[j], dims[j + 1]))
        a *= rng.random(a.shape) < rng.uniform(0.05, 0.6)
        factors.append(SparseMatrix.from_dense(a))
    scale = 1.0 if rng.random() < 0.3 else float(rng.uniform(-3, 3))
    return FaustOperator(factors, scale)


@pytest.mark.criterion("faust-equivalence")
def test_faust_equivalence():
    rng = np.random.default_rng(11)
    for _ in range(200):
        F = _random_operator(rng)
        m, n = F.shape
        x, y = rng.standard_normal(n), rng.standard_normal(m)
        D = faust_to_dense(F)
        c = FlopCounter()
        Fx = faust_apply(F, x, c)
        ref = D @ x
        assert np.linalg.norm(Fx - ref) <= 1e-10 * max(np.linalg.norm(ref), 1e-300) or not np.any(ref)
        assert c.flops <= 2 * F.s_tot + m
        FTy = faust_apply_transpose(F, y)
        lhs, rhs = Fx @ y, x @ FTy
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, np.linalg.norm(Fx) * np.linalg.norm(y))


TRADEOFF_BUDGETS = [(2, 128, 0.5), (2, 128, 0.8), (3, 192, 0.8), (4, 256, 0.9)]


@pytest.mark.criterion("tradeoff-ordering")
def test_tradeoff_against_svd():
    m, n = 64, 512
    clean = planted_faust(m, n, 4, 2, 2 * m, seed=5).toarray()
    noise = np.random.default_rng(6).standard_normal((m, n))
    A = clean + 0.01 * np.linalg.norm(clean) / np.linalg.norm(noise) * noise
    wins = 0
    for k, s, rho in TRADEOFF_BUDGETS:
        plan = make_schedule_plan(m, n, 4, k, s, rho, 1.4 * m * m)
        F, _ = hierarchical_factorize(A, plan)
        rank = F.s_tot // (m + n + 1)
        assert rank >= 1
        U, sv, V = truncated_svd(A, rank)
        svd_re = np.linalg.norm(A - (U * sv) @ V.T, 2) / np.linalg.norm(A, 2)
        re = relative_error(A, F)
        print(f"k={k} s={s} rho={rho}: s_tot={F.s_tot} RE={re:.3f} SVD rank {rank} RE={svd_re:.3f}")
        wins += re < svd_re
    assert wins >= 3


@pytest.mark.criterion("recovery-experiment")
def test_recovery_monotone():
    m, n = 32, 256
    exact = planted_faust(m, n, 3, 8, 4 * m, seed=0, unit_columns=True)
    M = exact.toarray()
    approx, _ = hierarchical_factorize(M, make_schedule_plan(m, n, 3, 8, 4 * m, 0.9, m * m))
    zero = FaustOperator([SparseMatrix.zeros(m, n)])
    re = relative_error(M, approx)
    assert 0.0 < re < 0.5
    report = localization_experiment(M, [exact, approx, zero], trials=500, seed=0,
                                     labels=["exact", "approx", "zero"])
    rates = [report.recovery_rate(lab) for lab in ("exact", "approx", "zero")]
    print(f"approx RE={re:.3f} rates exact/approx/zero={rates}")
    assert rates[0] >= rates[1] >= rates[2]
    assert report.supports("dense") == report.supports("exact")


@pytest.mark.criterion("denoising-sanity")
def test_denoise_sigma_30():
    clean = bundled_image()
    noisy = clean + 30.0 * np.random.default_rng(1).standard_normal(clean.shape)
    t0 = time.perf_counter()
    res = denoise_image(noisy, clean=clean)
    elapsed = time.perf_counter() - t0
    print(f"PSNR {res.psnr_in:.2f} -> {res.psnr_out:.2f} dB, RC={res.rc:.3f}, {elapsed:.1f}s")
    assert res.psnr_out - res.psnr_in >= 3.0
    assert res.rc < 0.5
    assert elapsed <= 300
