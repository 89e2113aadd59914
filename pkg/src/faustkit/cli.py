"""Command-line interface: ``faustkit <command> [options]``.

Commands
--------
factorize     hierarchical factorization of a matrix file or a demo matrix
apply         apply a stored FAuST (or its transpose) to a vector
svd-baseline  relative error of truncated SVDs over a list of ranks
localize      synthetic source-recovery experiment with OMP
denoise       patch-based image denoising with a learned FAuST dictionary

Plans are given as repeated ``--level "<residual>;<factor>"`` flags, as
schedule parameters (``--J --k --s --rho --P``) or in an INI config file
whose ``[factorize]`` section uses the long option names (``levels`` holds
one ``residual;factor`` pair per line). Command-line flags win over the
file. For an ``m x n`` input the first factor is ``m x n`` and every other
factor and residual is ``m x m``.

Constraint grammar::

    sp:<s> | spcol:<k> | sprow:<k> | splincol:<k> | supp:<path> | const:<path>
    pwc:<groups-path>:<s> | circ:<s> | toep:<s> | hank:<s> | diag | triu | tril

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import sys

import numpy as np

from . import io
from .linalg import NumericalError, truncated_svd
from .palm import PalmConfig

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class ConfigError(ValueError):
    pass


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _int_list(text):
    try:
        return [int(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="faustkit", description="Multi-layer sparse matrix factorization.")
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--threads", type=_positive_int, default=1,
                   help="worker cap; all commands currently run on one worker")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("factorize", help="hierarchical factorization")
    f.add_argument("input", nargs="?", help="matrix file (.mtx or plain text)")
    f.add_argument("--demo", choices=["hadamard"], help="factorize a built-in matrix")
    f.add_argument("--n", type=_positive_int, help="demo size")
    f.add_argument("--config", help="INI file with a [factorize] section")
    f.add_argument("--level", action="append", dest="levels", metavar="RES;FAC")
    f.add_argument("--J", type=int)
    f.add_argument("--k", type=int)
    f.add_argument("--s", type=int)
    f.add_argument("--rho", type=float)
    f.add_argument("--P", type=float)
    f.add_argument("--side", choices=["right", "left"])
    f.add_argument("--iters", type=_positive_int, help="sweeps per two-factor split (default 50)")
    f.add_argument("--global-iters", type=_positive_int, help="sweeps per refinement (default 50)")
    f.add_argument("--stop-error", type=float, help="stop adding factors once RE exceeds this")
    f.add_argument("--out", help="FAuST JSON output")
    f.add_argument("--trace", help="per-sweep trace CSV output")

    a = sub.add_parser("apply", help="apply a stored FAuST to a vector")
    a.add_argument("faust")
    a.add_argument("vector")
    a.add_argument("--out", help="output vector file (default: stdout)")
    a.add_argument("--transpose", action="store_true")
    a.add_argument("--count-flops", action="store_true")

    s = sub.add_parser("svd-baseline", help="truncated SVD error per rank")
    s.add_argument("input")
    s.add_argument("--ranks", type=_int_list, required=True, help="e.g. 1,2,4,8")
    s.add_argument("--out", help="CSV output (default: stdout)")

    loc = sub.add_parser("localize", help="synthetic OMP recovery experiment")
    loc.add_argument("--m", type=_positive_int, default=32)
    loc.add_argument("--n", type=_positive_int, default=256)
    loc.add_argument("--trials", type=_positive_int, default=500)
    loc.add_argument("--k", type=_positive_int, default=8, help="nonzeros per column of S_1")
    loc.add_argument("--s", type=_positive_int, default=None,
                     help="global budget of the approximation's square factors (default 4m)")
    loc.add_argument("--out", help="CSV report")

    d = sub.add_parser("denoise", help="patch-based denoising")
    d.add_argument("image", nargs="?", help="PGM image (default: bundled test image)")
    d.add_argument("--sigma", type=float, default=0.0,
                   help="add Gaussian noise of this std; the input then serves as reference")
    d.add_argument("--clean", help="clean reference PGM for PSNR")
    d.add_argument("--method", choices=["faust", "dense", "dct"], default="faust")
    d.add_argument("--atoms", type=_positive_int, default=128)
    d.add_argument("--t", type=_positive_int, default=5)
    d.add_argument("--patches", type=_positive_int, default=10000)
    d.add_argument("--ksvd-iters", type=_positive_int, default=10)
    d.add_argument("--J", type=int, default=4)
    d.add_argument("--s-over-m", type=_positive_int, default=3)
    d.add_argument("--rho", type=float, default=0.5)
    d.add_argument("--iters", type=_positive_int, default=50)
    d.add_argument("--out", help="denoised PGM output")
    d.add_argument("--report", help="CSV report")
    return p


# ---------------------------------------------------------------- factorize

_FACTORIZE_KEYS = {"input": str, "demo": str, "n": int, "j": int, "k": int, "s": int,
                   "rho": float, "p": float, "side": str, "iters": int, "global-iters": int,
                   "stop-error": float, "out": str, "trace": str, "levels": str}


def _read_config(path) -> dict:
    cp = configparser.ConfigParser()
    try:
        if not cp.read(path):
            raise ConfigError(f"cannot read config file {path}")
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not cp.has_section("factorize"):
        raise ConfigError(f"{path}: missing [factorize] section")
    out = {}
    for key, value in cp.items("factorize"):
        if key not in _FACTORIZE_KEYS:
            raise ConfigError(f"{path}: unknown key {key!r}")
        try:
            out[key] = _FACTORIZE_KEYS[key](value)
        except ValueError:
            raise ConfigError(f"{path}: bad value for {key}: {value!r}") from None
    if "levels" in out:
        out["levels"] = [ln.strip() for ln in out["levels"].splitlines() if ln.strip()]
    return out


def _merged(args) -> dict:
    cfg = _read_config(args.config) if args.config else {}
    flags = {"input": args.input, "demo": args.demo, "n": args.n, "j": args.J, "k": args.k,
             "s": args.s, "rho": args.rho, "p": args.P, "side": args.side, "iters": args.iters,
             "global-iters": args.global_iters, "stop-error": args.stop_error, "out": args.out,
             "trace": args.trace, "levels": args.levels}
    cfg.update({k: v for k, v in flags.items() if v is not None})
    return cfg


def _plan_from(cfg, shape):
    from .hierarchical import FactorizationPlan, make_hadamard_plan, make_schedule_plan
    from .projections import parse_constraint

    m, n = shape
    schedule = [cfg.get(k) for k in ("j", "k", "s", "rho", "p")]
    if cfg.get("levels"):
        levels = []
        for i, text in enumerate(cfg["levels"]):
            res, sep, fac = text.partition(";")
            if not sep:
                raise ConfigError(f"level {text!r} must be '<residual>;<factor>'")
            fac_shape = (m, n) if i == 0 else (m, m)
            levels.append((parse_constraint(res, (m, m)), parse_constraint(fac, fac_shape)))
        plan = FactorizationPlan(levels)
    elif any(v is not None for v in schedule):
        if any(v is None for v in schedule):
            raise ConfigError("schedule needs all of --J --k --s --rho --P")
        J, k, s, rho, P = schedule
        plan = make_schedule_plan(m, n, int(J), int(k), int(s), float(rho), float(P))
    elif cfg.get("demo") == "hadamard":
        plan = make_hadamard_plan(n)
    else:
        raise ConfigError("no plan: give --level, the schedule flags or a config file")
    plan.stop_error = cfg.get("stop-error")
    if cfg.get("side") == "left":
        plan = plan.transposed()
    return plan


def cmd_factorize(args) -> int:
    from .datasets import hadamard
    from .hierarchical import hierarchical_factorize
    from .sparse import relative_complexity, relative_error

    cfg = _merged(args)
    if cfg.get("demo") == "hadamard":
        if not cfg.get("n"):
            raise ConfigError("--demo hadamard needs --n")
        A = hadamard(cfg["n"])
    elif cfg.get("input"):
        A = io.read_matrix(cfg["input"])
    else:
        raise ConfigError("give an input matrix or --demo")
    if A.ndim != 2 or A.shape[0] < 2 and A.shape[1] < 2:
        raise ConfigError(f"matrix too small ({A.shape[0]}x{A.shape[1]}); need at least 2 rows or columns")
    if not np.all(np.isfinite(A)):
        raise ConfigError("input matrix has non-finite entries")
    if not np.any(A):
        raise ConfigError("input matrix is all zero")
    plan = _plan_from(cfg, A.shape)
    inner = PalmConfig(max_iter=cfg.get("iters", 50), seed=args.seed)
    glob = PalmConfig(max_iter=cfg.get("global-iters", 50), seed=args.seed)
    F, trace = hierarchical_factorize(A, plan, inner, glob)
    re = relative_error(A, F)
    rc = relative_complexity(F, A)
    if cfg.get("out"):
        io.write_faust(cfg["out"], F)
    if cfg.get("trace"):
        trace.write_csv(cfg["trace"])
    print(f"RE={re:.6g} RC={rc:.6g} RCG={1.0 / rc:.6g} s_tot={F.s_tot} J={F.n_factors} "
          f"time={trace.elapsed:.2f}s")
    return 0


# ---------------------------------------------------------------- others

def cmd_apply(args) -> int:
    from .sparse import FlopCounter

    F = io.read_faust(args.faust)
    v = io.read_vector(args.vector)
    counter = FlopCounter()
    out = F.apply_transpose(v, counter) if args.transpose else F.apply(v, counter)
    if args.out:
        io.write_vector(args.out, out)
    else:
        np.savetxt(sys.stdout, out, fmt="%.17g")
    if args.count_flops:
        print(f"flops={counter.flops} s_tot={F.s_tot}", file=sys.stderr if not args.out else sys.stdout)
    return 0


def svd_baseline_rows(A, ranks):
    """``(rank, RE, r * (m + n + 1))`` for each rank."""
    from .sparse import FaustOperator, relative_error

    m, n = A.shape
    rows = []
    for r in ranks:
        if not 1 <= r <= min(m, n):
            raise ConfigError(f"rank {r} outside [1, {min(m, n)}]")
        U, s, V = truncated_svd(A, r)
        approx = FaustOperator.from_dense_factors([(U * s) @ V.T])
        rows.append((r, relative_error(A, approx), r * (m + n + 1)))
    return rows


def cmd_svd_baseline(args) -> int:
    A = io.read_matrix(args.input)
    rows = svd_baseline_rows(A, args.ranks)
    header = ["rank", "re", "params"]
    if args.out:
        io.write_csv(args.out, header, [(r, repr(e), p) for r, e, p in rows])
    else:
        print(",".join(header))
        for r, e, p in rows:
            print(f"{r},{e!r},{p}")
    return 0


def cmd_localize(args) -> int:
    from .datasets import planted_faust
    from .hierarchical import hierarchical_factorize, make_schedule_plan
    from .solvers import localization_experiment
    from .sparse import FaustOperator, SparseMatrix, relative_error

    m, n = args.m, args.n
    if args.k > m:
        raise ConfigError("--k cannot exceed --m")
    exact = planted_faust(m, n, 3, args.k, 4 * m, seed=args.seed, unit_columns=True)
    M = exact.toarray()
    s = args.s or 4 * m
    plan = make_schedule_plan(m, n, 3, args.k, s, 0.9, float(m * m))
    approx, _ = hierarchical_factorize(M, plan, PalmConfig(seed=args.seed), PalmConfig(seed=args.seed))
    zero = FaustOperator([SparseMatrix.zeros(m, n)])
    report = localization_experiment(M, [exact, approx, zero], args.trials, args.seed,
                                     labels=["exact", "approx", "zero"])
    res = {"exact": 0.0, "approx": relative_error(M, approx), "zero": 1.0}
    for label, rate, overlap in report.summary():
        extra = f" RE={res[label]:.3g}" if label in res else ""
        print(f"{label}: recovery={rate:.3f} mean_overlap={overlap:.3f}{extra}")
    if args.out:
        report.write_csv(args.out)
    return 0


def cmd_denoise(args) -> int:
    from .datasets import test_image
    from .dictlearn import default_denoise_plan, denoise_image

    img = io.read_pgm(args.image) if args.image else test_image()
    clean = io.read_pgm(args.clean) if args.clean else None
    if args.sigma < 0:
        raise ConfigError("--sigma must be nonnegative")
    if args.sigma > 0:
        clean = img if clean is None else clean
        img = img + args.sigma * np.random.default_rng(args.seed).standard_normal(img.shape)
    if min(img.shape) < 8:
        raise ConfigError(f"image {img.shape[0]}x{img.shape[1]} is smaller than the 8x8 patch")
    plan = default_denoise_plan(64, args.atoms, args.J, args.s_over_m, args.rho) \
        if args.method == "faust" else None
    cfg = PalmConfig(max_iter=args.iters, seed=args.seed)
    res = denoise_image(img, n_atoms=args.atoms, t=args.t, plan=plan, n_patches=args.patches,
                        ksvd_iters=args.ksvd_iters, clean=clean, seed=args.seed,
                        method=args.method, inner=cfg, global_=cfg)
    if args.out:
        io.write_pgm(args.out, res.image)
    line = f"method={args.method} RC={res.rc:.4g} s_tot={res.s_tot}"
    if res.psnr_in is not None:
        line += f" PSNR_in={res.psnr_in:.2f} PSNR_out={res.psnr_out:.2f}"
    print(line)
    if args.report:
        io.write_csv(args.report, ["method", "sigma", "psnr_in", "psnr_out", "rc", "s_tot"],
                     [(args.method, args.sigma, res.psnr_in, res.psnr_out, res.rc, res.s_tot)])
    return 0


COMMANDS = {"factorize": cmd_factorize, "apply": cmd_apply, "svd-baseline": cmd_svd_baseline,
            "localize": cmd_localize, "denoise": cmd_denoise}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else 0
    try:
        return COMMANDS[args.command](args)
    except NumericalError as exc:
        print(f"faustkit: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, OSError, KeyError) as exc:
        print(f"faustkit: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
