"""Command-line entry point: ``jointdiag {solve,bench,harmonic}``.

Exit codes: 0 success, 2 input error, 3 numeric failure at initialization,
4 internal invariant violation.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .cmat import SingularMatrix
from .ensemble_gen import generate
from .harmonic3d import (
    DEFAULT_GRID,
    DEFAULT_MODES,
    HarmonicModel,
    ModeDegenerate,
    RankDeficient,
    esprit_reduce,
    frequency_error,
    recover_frequencies,
    synthesize,
)
from .metrics import eigenvalue_error, median_log10_objective
from .objective import MatrixEnsemble
from .solvers import Init, SolverConfig, Termination, solve

log = logging.getLogger("jointdiag")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3
EXIT_INTERNAL = 4

RESULT_COLUMNS = [
    "seed", "n", "k", "snr_db", "algorithm", "update_mode", "init",
    "final_objective", "log10_objective", "eig_error", "iterations",
    "termination", "wall_time_s",
]
HARMONIC_COLUMNS = [
    "seed", "snr_db", "method", "final_objective", "freq_error", "iters", "wall_time",
]


class InputError(ValueError):
    pass


# --- serialization -----------------------------------------------------------


def matrix_to_json(M):
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(M)]


def matrix_from_json(rows):
    try:
        arr = np.asarray(rows, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputError(f"matrix must be a nested list of [re, im] pairs: {exc}") from exc
    if arr.ndim != 3 or arr.shape[-1] != 2:
        raise InputError("matrix must be a nested list of [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def ensemble_to_dict(A):
    if not isinstance(A, MatrixEnsemble):
        A = MatrixEnsemble(A)
    return {
        "n": A.n,
        "k": A.K,
        "matrices": [matrix_to_json(M) for M in A.matrices],
    }


def ensemble_from_dict(doc):
    try:
        n, k, mats = int(doc["n"]), int(doc["k"]), doc["matrices"]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"ensemble document is missing or has a bad field: {exc}") from exc
    if len(mats) != k:
        raise InputError(f"expected {k} matrices, found {len(mats)}")
    arr = np.stack([matrix_from_json(M) for M in mats]) if k else None
    if arr is None or arr.shape != (k, n, n):
        raise InputError(f"matrices do not have shape ({k}, {n}, {n})")
    return MatrixEnsemble(arr)


def dumps_ensemble(A):
    # json writes floats with repr, which round-trips doubles exactly
    return json.dumps(ensemble_to_dict(A))


def loads_ensemble(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON: {exc}") from exc
    return ensemble_from_dict(doc)


def result_to_dict(result):
    return {
        "U": matrix_to_json(result.U),
        "diagonals": [[[float(z.real), float(z.imag)] for z in d] for d in result.diagonals],
        "transformed": ensemble_to_dict(MatrixEnsemble(result.D)),
        "trace": [
            {
                "iter": row.iter,
                "objective": row.objective,
                "lambda": None if math.isnan(row.lam) else row.lam,
                "branch": row.branch.value if row.branch else None,
                "beta": None if math.isnan(row.beta) else row.beta,
                "inner_iters": row.inner_iters,
            }
            for row in result.trace
        ],
        "termination": result.termination.value,
        "wall_time": result.wall_time,
    }


# --- campaign workers --------------------------------------------------------


def _bench_job(args):
    seed, n, k, snr, algorithms, cfg_kw = args
    gt = generate(n, k, snr, seed)
    rows = []
    for alg in algorithms:
        cfg = SolverConfig(algorithm=alg, **cfg_kw)
        try:
            res = solve(gt.noisy, cfg)
            f = res.final_objective
            eig_err = eigenvalue_error(res, gt).total_error
            iters, term, wall = res.iterations, res.termination.value, res.wall_time
        except (SingularMatrix, ArithmeticError, np.linalg.LinAlgError) as exc:
            log.warning("seed %d %s failed: %s", seed, alg, exc)
            f, eig_err, iters, term, wall = math.nan, math.nan, 0, Termination.STALLED.value, 0.0
        rows.append({
            "seed": seed, "n": n, "k": k, "snr_db": snr, "algorithm": alg,
            "update_mode": cfg.update_mode.value,
            "init": cfg.init.value if isinstance(cfg.init, Init) else "file",
            "final_objective": repr(f),
            "log10_objective": repr(math.log10(f)) if f > 0 else "-inf" if f == 0 else "nan",
            "eig_error": repr(eig_err), "iterations": iters, "termination": term,
            "wall_time_s": f"{wall:.6f}",
        })
    return rows


def _harmonic_job(args):
    seed, snr, k_modes, grid, algorithms, cfg_kw = args
    model = HarmonicModel.random(k_modes, grid, snr, seed)
    try:
        A = esprit_reduce(synthesize(model), k_modes)
    except RankDeficient as exc:
        log.warning("seed %d snr %s skipped: %s", seed, snr, exc)
        return []
    rows = []
    for alg in algorithms:
        res = solve(A, SolverConfig(algorithm=alg, **cfg_kw))
        try:
            err = repr(frequency_error(recover_frequencies(res), model.exponents)[0])
        except ModeDegenerate as exc:
            log.warning("seed %d snr %s %s: %s", seed, snr, alg, exc)
            err = "nan"
        rows.append({
            "seed": seed, "snr_db": snr, "method": alg,
            "final_objective": repr(res.final_objective), "freq_error": err,
            "iters": res.iterations, "wall_time": f"{res.wall_time:.6f}",
        })
    return rows


def _workers():
    cap = os.environ.get("JD_THREADS")
    n = os.cpu_count() or 1
    if cap:
        n = min(n, max(1, int(cap)))
    return n


def run_jobs(fn, jobs):
    """Map ``fn`` over ``jobs`` in a process pool; results come back in job order."""
    workers = _workers()
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


# --- commands ----------------------------------------------------------------


def _cfg_kwargs(args):
    init = args.init
    if init.startswith("file:"):
        path = init[len("file:"):]
        try:
            with open(path) as fh:
                U = matrix_from_json(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read initial basis {path}: {exc}") from exc
        init = U
    return dict(
        update_mode=args.update,
        init=init,
        max_iters=args.max_iters,
        rel_tol=args.rel_tol,
        qn_inner_max=args.qn_inner_max,
        qn_inner_reduction=args.qn_inner_reduction,
        lambda_margin=args.lambda_margin,
    )


def cmd_solve(args):
    try:
        with open(args.input) as fh:
            A = loads_ensemble(fh.read())
        cfg = SolverConfig(algorithm=args.algorithm[0] if args.algorithm else "cg", **_cfg_kwargs(args))
        if isinstance(cfg.init, np.ndarray) and cfg.init.shape != (A.n, A.n):
            raise InputError(f"initial basis has shape {cfg.init.shape}, expected {(A.n, A.n)}")
    except (OSError, InputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        result = solve(A, cfg)
    except SingularMatrix as exc:
        print(f"error: singular initial basis: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if not np.all(np.isfinite(result.objective_trace)):
        print("error: non-finite objective in trace", file=sys.stderr)
        return EXIT_INTERNAL
    text = json.dumps(result_to_dict(result))
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        print(text)
    return EXIT_OK


def _open_out(path):
    return open(path, "w", newline="") if path else sys.stdout


def cmd_bench(args):
    try:
        cfg_kw = _cfg_kwargs(args)
        SolverConfig(**cfg_kw)
    except (InputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.runs < 1:
        print("error: --runs must be at least 1", file=sys.stderr)
        return EXIT_INPUT
    algorithms = args.algorithm or ["cg", "qn"]
    snrs = args.snr or [30.0]
    jobs = [
        (seed, args.n, args.k, snr, algorithms, cfg_kw)
        for seed in range(args.seed, args.seed + args.runs)
        for snr in snrs
    ]
    out = _open_out(args.output)
    try:
        writer = csv.DictWriter(out, fieldnames=RESULT_COLUMNS, lineterminator="\n")
        writer.writeheader()
        all_rows = []
        show = bool(args.output) and sys.stderr.isatty()
        for i, rows in enumerate(run_jobs(_bench_job, jobs), 1):
            writer.writerows(rows)
            all_rows.extend(rows)
            if show:
                print(f"\r{i}/{len(jobs)} runs", end="", file=sys.stderr)
        if show:
            print(file=sys.stderr)
    finally:
        if args.output:
            out.close()
    for snr in snrs:
        for alg in algorithms:
            fs = [float(r["final_objective"]) for r in all_rows
                  if r["algorithm"] == alg and r["snr_db"] == snr]
            fs = [f for f in fs if f > 0]
            if fs:
                print(f"snr={snr:g} {alg}: median log10 f = {median_log10_objective(fs):.3f}",
                      file=sys.stderr)
    return EXIT_OK


def cmd_harmonic(args):
    try:
        cfg_kw = _cfg_kwargs(args)
        grid = tuple(args.grid)
        if len(grid) == 1:
            grid = grid * 3
        if len(grid) != 3:
            raise InputError("--grid takes one or three sizes")
    except (InputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    algorithms = args.algorithm or ["cg", "qn"]
    snrs = args.snr or [10.0, 20.0, 30.0, 40.0]
    jobs = [
        (seed, snr, args.k_modes, grid, algorithms, cfg_kw)
        for seed in range(args.seed, args.seed + args.runs)
        for snr in snrs
    ]
    out = _open_out(args.output)
    try:
        writer = csv.DictWriter(out, fieldnames=HARMONIC_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for rows in run_jobs(_harmonic_job, jobs):
            writer.writerows(rows)
    finally:
        if args.output:
            out.close()
    return EXIT_OK


def _snr(text):
    return math.inf if text.lower() in ("inf", "+inf", "infinity") else float(text)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", help="output path (default: standard output)")
    common.add_argument("--algorithm", action="append", choices=["gd", "cg", "qn"],
                        help="solver; repeat for several (bench/harmonic)")
    common.add_argument("--update", choices=["mult", "add"], default="mult")
    common.add_argument("--init", default="eigsum",
                        help="eigsum, identity, or file:PATH with a JSON [re, im] matrix")
    common.add_argument("--max-iters", type=int, default=1000)
    common.add_argument("--rel-tol", type=float, default=1e-12)
    common.add_argument("--qn-inner-max", type=int, default=100)
    common.add_argument("--qn-inner-reduction", type=float, default=0.1)
    common.add_argument("--lambda-margin", type=float, default=2.0)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--runs", type=int, default=1)
    common.add_argument("--snr", type=_snr, action="append",
                        help="SNR in dB (repeatable; 'inf' for no noise)")

    parser = argparse.ArgumentParser(prog="jointdiag", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="jointly diagonalize an ensemble file")
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bench", parents=[common], help="Monte Carlo campaign on synthetic ensembles")
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--k", type=int, default=5)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("harmonic", parents=[common], help="3-D harmonic retrieval demo")
    p.add_argument("--k-modes", type=int, default=DEFAULT_MODES)
    p.add_argument("--grid", type=int, nargs="+", default=list(DEFAULT_GRID))
    p.set_defaults(func=cmd_harmonic)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - report, never dump a traceback
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
