"""Benchmark harness: single trials, solver enums, sweeps, CSV results.

A trial generates a seeded instance, runs one solver, and scores the
estimate against the known ground truth. Sweeps iterate a grid over k
and/or n, run a fixed number of trials per cell with seeds
base_seed + trial_index (so every solver in a cell sees identical
instances), and write one CSV row per trial plus an aggregate row per
(cell, solver). Everything except wall time is deterministic.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .core import (
    DegenerateInputError,
    InfeasibleProblemError,
    InvalidArgumentError,
    MmvProblem,
    SupportSet,
    row_norms,
    row_support,
)
from .iht import IhtConfig, iht_solve
from .nesta import DETECT_REL_TOL, RecoveryReport, iterative_nesta, nesta_solve
from .synth import ProblemSpec, gen_instance

SOLVER_NESTA = "nesta"
SOLVER_ITERATIVE_NESTA = "iterative-nesta"
SOLVER_IHT = "iht"
SOLVER_SMV = "smv"
SOLVERS = (SOLVER_NESTA, SOLVER_ITERATIVE_NESTA, SOLVER_IHT, SOLVER_SMV)

RESULT_HEADER = (
    "solver,n,N,L,k,rank,noise_sigma,seed,relative_error,support_exact,"
    "inner_iters,outer_iters,wall_time_s,success"
)

# Marker in the seed column of per-cell aggregate rows.
AGGREGATE_MARKER = "agg"


@dataclass(eq=False)
class TrialResult:
    spec: ProblemSpec
    solver: str
    relative_error: float
    support_exact: bool
    inner_iterations: int
    outer_iterations: int
    wall_time: float
    success: bool
    error: str | None = None


def solve_smv_per_column(problem, smoothing=None, cfg=None):
    """Per-channel baseline: solve each column as its own L=1 problem.

    Reuses the exact joint solver machinery so comparisons isolate the
    row-coupling, not implementation differences. The noise radius is
    split as epsilon / sqrt(L) per column, which keeps the stacked
    residual within the original ball.
    """
    t0 = time.perf_counter()
    L = problem.L
    eps_col = problem.epsilon / np.sqrt(L)
    columns = []
    inner = 0
    trace = []
    converged = True
    for j in range(L):
        sub = MmvProblem(
            A=problem.A, B=problem.B[:, j : j + 1], epsilon=eps_col, Psi=problem.Psi
        )
        rep = nesta_solve(sub, smoothing, cfg)
        columns.append(rep.estimate[:, 0])
        inner += rep.inner_iterations
        trace.extend(rep.objective_trace)
        converged = converged and rep.converged
    estimate = np.column_stack(columns)
    alpha_hat = problem.coefficients_from_signal(estimate)
    max_row = float(row_norms(alpha_hat, 2).max())
    detected = (
        row_support(alpha_hat, DETECT_REL_TOL * max_row) if max_row > 0 else SupportSet()
    )
    residual = float(np.linalg.norm(problem.phi @ alpha_hat - problem.B))
    return RecoveryReport(
        estimate=estimate,
        inner_iterations=inner,
        outer_iterations=1,
        final_residual=residual,
        final_objective=trace[-1] if trace else 0.0,
        detected_support=detected,
        objective_trace=trace,
        wall_time=time.perf_counter() - t0,
        converged=converged,
    )


def run_trial(
    spec,
    solver,
    success_threshold=1e-3,
    smoothing=None,
    cfg=None,
    iht_cfg=None,
    k_threshold=None,
    use_music=False,
    max_outer=10,
):
    """Generate, solve, and score one instance. Solver failures are recorded
    in the result (success False, error note) rather than raised."""
    if solver not in SOLVERS:
        raise InvalidArgumentError(f"unknown solver {solver!r}; use one of {SOLVERS}")
    instance = gen_instance(spec)
    problem = instance.problem
    k_thr = spec.k if k_threshold is None else k_threshold
    t0 = time.perf_counter()
    try:
        if solver == SOLVER_NESTA:
            report = nesta_solve(problem, smoothing, cfg)
        elif solver == SOLVER_ITERATIVE_NESTA:
            report = iterative_nesta(
                problem, k_thr, smoothing, cfg, use_music=use_music, max_outer=max_outer
            )
        elif solver == SOLVER_IHT:
            report = iht_solve(problem, iht_cfg if iht_cfg is not None else IhtConfig(k=k_thr))
        else:
            report = solve_smv_per_column(problem, smoothing, cfg)
    except (InfeasibleProblemError, DegenerateInputError, InvalidArgumentError) as exc:
        return TrialResult(
            spec=spec,
            solver=solver,
            relative_error=float("inf"),
            support_exact=False,
            inner_iterations=0,
            outer_iterations=0,
            wall_time=time.perf_counter() - t0,
            success=False,
            error=str(exc),
        )
    wall = time.perf_counter() - t0
    truth_norm = float(np.linalg.norm(instance.X_true))
    rel = float(np.linalg.norm(report.estimate - instance.X_true)) / truth_norm
    return TrialResult(
        spec=spec,
        solver=solver,
        relative_error=rel,
        support_exact=report.detected_support == instance.support_true,
        inner_iterations=report.inner_iterations,
        outer_iterations=report.outer_iterations,
        wall_time=wall,
        success=rel < success_threshold,
    )


@dataclass(frozen=True)
class SweepConfig:
    """A grid over k and/or n around a base spec, plus output location."""

    base: ProblemSpec
    solvers: tuple[str, ...]
    trials: int
    output: str
    grid_k: tuple[int, ...] = ()
    grid_n: tuple[int, ...] = ()
    success_threshold: float = 1e-3

    def __post_init__(self):
        if self.trials < 1:
            raise InvalidArgumentError("trials must be >= 1")
        if not self.solvers:
            raise InvalidArgumentError("at least one solver is required")
        for s in self.solvers:
            if s not in SOLVERS:
                raise InvalidArgumentError(f"unknown solver {s!r}; use one of {SOLVERS}")
        if not self.grid_k:
            object.__setattr__(self, "grid_k", (self.base.k,))
        if not self.grid_n:
            object.__setattr__(self, "grid_n", (self.base.n,))


def _parse_int_list(raw):
    return tuple(int(v.strip()) for v in raw.split(",") if v.strip())


def read_keyvalue(path):
    """Parse a flat ``key = value`` text file; '#' starts a comment line."""
    fields = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise InvalidArgumentError(f"{path}:{lineno}: expected 'key = value'")
            fields[key.strip()] = value.strip()
    return fields


def parse_sweep_config(path):
    """Build a :class:`SweepConfig` from a flat key-value file."""
    fields = read_keyvalue(path)
    try:
        base = ProblemSpec(
            n=int(fields["n"]),
            N=int(fields["N"]),
            L=int(fields["L"]),
            k=int(fields["k"]),
            rank=int(fields["rank"]),
            noise_sigma=float(fields.get("noise_sigma", 0.0)),
            matrix_kind=fields.get("matrix_kind", ProblemSpec.matrix_kind),
            seed=int(fields.get("seed", 0)),
        )
        return SweepConfig(
            base=base,
            solvers=tuple(s.strip() for s in fields["solvers"].split(",") if s.strip()),
            trials=int(fields["trials"]),
            output=fields["output"],
            grid_k=_parse_int_list(fields.get("grid.k", "")),
            grid_n=_parse_int_list(fields.get("grid.n", "")),
            success_threshold=float(fields.get("success_threshold", 1e-3)),
        )
    except KeyError as exc:
        raise InvalidArgumentError(f"sweep config is missing key {exc}") from exc


def _fmt(value):
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def run_sweep(sweep):
    """Run every (cell, solver, trial) and write the results CSV.

    Returns (trial_results, aggregates) where aggregates maps
    (n, k, solver) to a dict with success_rate and medians. The output file
    records the success threshold in a comment line above the header; rerun
    with identical config, the file is byte-identical except wall times.
    """
    fh = open(sweep.output, "w")
    try:
        fh.write(f"# success_threshold = {_fmt(float(sweep.success_threshold))}\n")
        fh.write(RESULT_HEADER + "\n")
        all_results = []
        aggregates = {}
        for n in sweep.grid_n:
            for k in sweep.grid_k:
                for solver in sweep.solvers:
                    cell = []
                    for t in range(sweep.trials):
                        spec = replace(sweep.base, n=n, k=k, seed=sweep.base.seed + t)
                        result = run_trial(
                            spec, solver, success_threshold=sweep.success_threshold
                        )
                        cell.append(result)
                        fh.write(_trial_row(result) + "\n")
                    agg = _aggregate(cell)
                    aggregates[(n, k, solver)] = agg
                    fh.write(_aggregate_row(solver, cell[0].spec, agg) + "\n")
                    all_results.extend(cell)
        return all_results, aggregates
    finally:
        fh.close()


def _trial_row(r):
    s = r.spec
    fields = (
        r.solver,
        s.n,
        s.N,
        s.L,
        s.k,
        s.rank,
        float(s.noise_sigma),
        s.seed,
        float(r.relative_error),
        r.support_exact,
        r.inner_iterations,
        r.outer_iterations,
        float(r.wall_time),
        r.success,
    )
    return ",".join(_fmt(v) for v in fields)


def _aggregate(cell):
    return {
        "success_rate": float(np.mean([r.success for r in cell])),
        "support_exact_rate": float(np.mean([r.support_exact for r in cell])),
        "median_relative_error": float(np.median([r.relative_error for r in cell])),
        "median_inner_iters": float(np.median([r.inner_iterations for r in cell])),
        "median_outer_iters": float(np.median([r.outer_iterations for r in cell])),
        "total_wall_time": float(np.sum([r.wall_time for r in cell])),
    }


def _aggregate_row(solver, spec, agg):
    fields = (
        solver,
        spec.n,
        spec.N,
        spec.L,
        spec.k,
        spec.rank,
        float(spec.noise_sigma),
        AGGREGATE_MARKER,
        agg["median_relative_error"],
        agg["support_exact_rate"],
        agg["median_inner_iters"],
        agg["median_outer_iters"],
        agg["total_wall_time"],
        agg["success_rate"],
    )
    return ",".join(_fmt(v) for v in fields)
