"""Command-line interface for recoveries, sweeps, spark, and MUSIC detection.

Exit codes: 0 success, 2 invalid arguments, 3 infeasible or degenerate
problem, 4 I/O error. All output except wall-time fields is deterministic
for identical flags.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .core import (
    DegenerateInputError,
    InfeasibleProblemError,
    InvalidArgumentError,
    MmvProblem,
    read_matrix,
    spark,
    write_matrix,
)
from .harness import (
    SOLVER_ITERATIVE_NESTA,
    SOLVER_NESTA,
    SOLVER_SMV,
    SOLVERS,
    parse_sweep_config,
    read_keyvalue,
    run_sweep,
    solve_smv_per_column,
)
from .iht import IhtConfig, iht_solve
from .music import music_support
from .nesta import NestaConfig, iterative_nesta, nesta_solve
from .synth import MATRIX_KINDS, ProblemSpec, gen_instance


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="mmvsolve",
        description="Recover jointly row-sparse matrices from multiple measurement vectors.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="run one recovery and print a summary line")
    solve.add_argument("--spec", help="key-value file with n, N, L, k, rank, noise_sigma, seed")
    solve.add_argument("--n", type=int)
    solve.add_argument("--N", type=int)
    solve.add_argument("--L", type=int)
    solve.add_argument("--k", type=int)
    solve.add_argument("--rank", type=int)
    solve.add_argument("--noise", type=float, default=0.0)
    solve.add_argument("--seed", type=int, default=0)
    solve.add_argument("--matrix-kind", choices=MATRIX_KINDS, default=None)
    solve.add_argument("--solver", choices=SOLVERS, default=SOLVER_NESTA)
    solve.add_argument("--eps", type=float, default=None)
    solve.add_argument("--mu-final", type=float, default=None)
    solve.add_argument("--k-threshold", type=int, default=None)
    solve.add_argument("--use-music", action="store_true")
    solve.add_argument("--dump-estimate", metavar="PATH")
    solve.add_argument("--load-matrix", metavar="PATH", help="CSV operator (skips generation)")
    solve.add_argument("--load-data", metavar="PATH", help="CSV measurement block")

    sweep = sub.add_parser("sweep", help="run a phase-transition sweep from a config file")
    sweep.add_argument("--config", required=True)

    spark_cmd = sub.add_parser("spark", help="brute-force spark of a CSV matrix")
    spark_cmd.add_argument("--matrix", required=True)
    spark_cmd.add_argument("--tol", type=float, default=1e-10)

    music_cmd = sub.add_parser("music", help="subspace support detection on CSV data")
    music_cmd.add_argument("--matrix", required=True)
    music_cmd.add_argument("--data", required=True)
    music_cmd.add_argument("--k", type=int, required=True)
    music_cmd.add_argument("--delta", type=float, default=1e-8)
    return parser


def _spec_from_args(args):
    if args.spec:
        fields = read_keyvalue(args.spec)
        try:
            return ProblemSpec(
                n=int(fields["n"]),
                N=int(fields["N"]),
                L=int(fields["L"]),
                k=int(fields["k"]),
                rank=int(fields["rank"]),
                noise_sigma=float(fields.get("noise_sigma", 0.0)),
                matrix_kind=fields.get("matrix_kind", ProblemSpec.matrix_kind),
                seed=int(fields.get("seed", 0)),
            )
        except KeyError as exc:
            raise InvalidArgumentError(f"spec file is missing key {exc}") from exc
    missing = [f for f in ("n", "N", "L", "k") if getattr(args, f) is None]
    if missing:
        raise InvalidArgumentError(
            f"either --spec or all of --n/--N/--L/--k are required (missing {missing})"
        )
    rank = args.rank if args.rank is not None else min(args.k, args.L)
    kind = args.matrix_kind if args.matrix_kind is not None else ProblemSpec.matrix_kind
    return ProblemSpec(
        n=args.n,
        N=args.N,
        L=args.L,
        k=args.k,
        rank=rank,
        noise_sigma=args.noise,
        matrix_kind=kind,
        seed=args.seed,
    )


def _solve_loaded(args):
    """Solve a problem read from CSV files; no ground truth available."""
    if not args.load_data:
        raise InvalidArgumentError("--load-matrix requires --load-data")
    A = read_matrix(args.load_matrix)
    B = read_matrix(args.load_data)
    eps = args.eps if args.eps is not None else 0.0
    problem = MmvProblem(A=A, B=B, epsilon=eps)
    cfg = NestaConfig(mu_final=args.mu_final)
    if args.solver == SOLVER_NESTA:
        report = nesta_solve(problem, cfg=cfg)
    elif args.solver == SOLVER_SMV:
        report = solve_smv_per_column(problem, cfg=cfg)
    else:
        if args.k_threshold is None:
            raise InvalidArgumentError(f"--solver {args.solver} needs --k-threshold")
        if args.solver == SOLVER_ITERATIVE_NESTA:
            report = iterative_nesta(
                problem, args.k_threshold, cfg=cfg, use_music=args.use_music
            )
        else:
            report = iht_solve(problem, IhtConfig(k=args.k_threshold))
    summary = (
        f"solver={args.solver} residual={report.final_residual!r} "
        f"inner_iters={report.inner_iterations} outer_iters={report.outer_iterations} "
        f"wall_time_s={report.wall_time!r}"
    )
    print(summary)
    if args.dump_estimate:
        write_matrix(args.dump_estimate, report.estimate)
    return 0


def _cmd_solve(args):
    if args.load_matrix or args.load_data:
        if not args.load_matrix:
            raise InvalidArgumentError("--load-data requires --load-matrix")
        return _solve_loaded(args)
    spec = _spec_from_args(args)
    cfg = NestaConfig(epsilon=args.eps, mu_final=args.mu_final)
    instance = gen_instance(spec)
    k_thr = args.k_threshold if args.k_threshold is not None else spec.k
    if args.solver == SOLVER_NESTA:
        report = nesta_solve(instance.problem, cfg=cfg)
    elif args.solver == SOLVER_SMV:
        report = solve_smv_per_column(instance.problem, cfg=cfg)
    elif args.solver == SOLVER_ITERATIVE_NESTA:
        report = iterative_nesta(instance.problem, k_thr, cfg=cfg, use_music=args.use_music)
    else:
        report = iht_solve(instance.problem, IhtConfig(k=k_thr))
    rel = float(
        np.linalg.norm(report.estimate - instance.X_true)
        / np.linalg.norm(instance.X_true)
    )
    support_exact = report.detected_support == instance.support_true
    summary = (
        f"solver={args.solver} rel_error={rel!r} "
        f"residual={report.final_residual!r} support_exact={int(support_exact)} "
        f"inner_iters={report.inner_iterations} outer_iters={report.outer_iterations} "
        f"wall_time_s={report.wall_time!r}"
    )
    print(summary)
    if args.dump_estimate:
        write_matrix(args.dump_estimate, report.estimate)
    return 0


def _cmd_sweep(args):
    sweep = parse_sweep_config(args.config)
    results, aggregates = run_sweep(sweep)
    print(f"wrote {sweep.output}: {len(results)} trial rows, {len(aggregates)} aggregate rows")
    return 0


def _cmd_spark(args):
    M = read_matrix(args.matrix)
    print(spark(M, rank_tol=args.tol))
    return 0


def _cmd_music(args):
    A = read_matrix(args.matrix)
    B = read_matrix(args.data)
    problem = MmvProblem(A=A, B=B, epsilon=0.0)
    result = music_support(problem, args.k, delta=args.delta)
    print(f"rank={result.rank}")
    print("support=" + ",".join(str(i) for i in result.support))
    return 0


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "solve": _cmd_solve,
        "sweep": _cmd_sweep,
        "spark": _cmd_spark,
        "music": _cmd_music,
    }
    try:
        return handlers[args.command](args)
    except InvalidArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (InfeasibleProblemError, DegenerateInputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
