"""Reproducible synthetic problem instances with controllable joint sparsity.

Randomness comes from an explicit 64-bit generator (splitmix64) with
Box-Muller normal variates rather than a platform RNG, so a seed pins the
exact draw sequence. The ground-truth signal places a rank-controlled
random block on a uniformly drawn row support; measurements add optional
entrywise Gaussian noise, with the feasibility radius calibrated to 1.1
times the expected noise Frobenius norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    InvalidArgumentError,
    MeasurementMatrix,
    MmvProblem,
    SupportSet,
    read_matrix,
    row_orthonormalize,
    write_matrix,
)

MATRIX_GAUSSIAN = "gaussian"
MATRIX_ROW_ORTHONORMAL = "row-orthonormal-gaussian"
MATRIX_KINDS = (MATRIX_GAUSSIAN, MATRIX_ROW_ORTHONORMAL)

# Slack factor on the expected noise norm when calibrating epsilon.
EPSILON_SLACK = 1.1

_MASK64 = (1 << 64) - 1


class Rng64:
    """splitmix64 with Box-Muller normals; bit-reproducible from the seed.

    State transition: s <- s + 0x9E3779B97F4A7C15 (mod 2^64), output
    mixed by two xor-shift-multiply rounds. Uniforms take the top 53 bits
    shifted into (0, 1]; normals come in Box-Muller pairs with the spare
    cached. Integer draws below a bound use rejection sampling, so there
    is no modulo bias.
    """

    def __init__(self, seed):
        self._state = int(seed) & _MASK64
        self._spare = None

    def next_u64(self):
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def uniform(self):
        """Uniform in (0, 1]; never zero, so log() is always safe."""
        return ((self.next_u64() >> 11) + 1) * 2.0**-53

    def below(self, bound):
        """Uniform integer in [0, bound)."""
        if bound < 1:
            raise InvalidArgumentError("bound must be positive")
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            r = self.next_u64()
            if r < limit:
                return r % bound

    def normal(self):
        if self._spare is not None:
            value, self._spare = self._spare, None
            return value
        u1 = self.uniform()
        u2 = self.uniform()
        radius = math.sqrt(-2.0 * math.log(u1))
        theta = 2.0 * math.pi * u2
        self._spare = radius * math.sin(theta)
        return radius * math.cos(theta)

    def normals(self, rows, cols):
        """Row-major matrix of standard normals."""
        out = np.empty((rows, cols))
        for i in range(rows):
            for j in range(cols):
                out[i, j] = self.normal()
        return out

    def subset(self, n, k):
        """Uniform k-subset of range(n), ascending (partial Fisher-Yates)."""
        pool = list(range(n))
        for i in range(k):
            j = i + self.below(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return tuple(sorted(pool[:k]))


@dataclass(frozen=True)
class ProblemSpec:
    """Everything needed to regenerate one instance, including the seed."""

    n: int
    N: int
    L: int
    k: int
    rank: int
    noise_sigma: float = 0.0
    matrix_kind: str = MATRIX_ROW_ORTHONORMAL
    seed: int = 0

    def __post_init__(self):
        for name in ("n", "N", "L", "k", "rank"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise InvalidArgumentError(f"{name} must be a positive integer, got {v!r}")
        if self.k >= self.N:
            raise InvalidArgumentError(f"k = {self.k} must be < N = {self.N}")
        if self.rank > min(self.k, self.L):
            raise InvalidArgumentError(
                f"rank = {self.rank} must be <= min(k, L) = {min(self.k, self.L)}"
            )
        if self.noise_sigma < 0:
            raise InvalidArgumentError("noise_sigma must be nonnegative")
        if self.matrix_kind not in MATRIX_KINDS:
            raise InvalidArgumentError(
                f"unknown matrix_kind {self.matrix_kind!r}; use one of {MATRIX_KINDS}"
            )
        if not 0 <= int(self.seed) <= _MASK64:
            raise InvalidArgumentError("seed must fit in 64 unsigned bits")


@dataclass(eq=False)
class GroundTruthInstance:
    problem: MmvProblem
    X_true: np.ndarray
    support_true: SupportSet
    spec: ProblemSpec


def _rank_checked_block(rng, k, rank, L):
    """k x L block of exact numerical rank ``rank`` with no zero rows."""
    while True:
        left = rng.normals(k, rank)
        right = rng.normals(rank, L)
        block = left @ right
        sv = np.linalg.svd(block, compute_uv=False)
        numerical_rank = int((sv > 1e-10 * sv[0]).sum()) if sv[0] > 0 else 0
        if numerical_rank == rank and (block != 0).any(axis=1).all():
            return block


def gen_instance(spec):
    """Deterministically generate a problem with known ground truth.

    Draw order (fixed; it is part of the reproducibility contract):
    measurement matrix entries row-major, then the support subset, then the
    left and right rank factors (redrawn together if rank deficient), then
    the noise block. epsilon is 1.1 * sqrt(n L) * noise_sigma, or 0 for
    noiseless data.
    """
    rng = Rng64(spec.seed)
    A_raw = rng.normals(spec.n, spec.N)
    if spec.matrix_kind == MATRIX_ROW_ORTHONORMAL:
        A = row_orthonormalize(A_raw)
    else:
        A = MeasurementMatrix.from_entries(A_raw)

    support = SupportSet(rng.subset(spec.N, spec.k))
    block = _rank_checked_block(rng, spec.k, spec.rank, spec.L)
    X = np.zeros((spec.N, spec.L))
    X[support.as_array()] = block

    B = A.entries @ X
    if spec.noise_sigma > 0:
        B = B + spec.noise_sigma * rng.normals(spec.n, spec.L)
        epsilon = EPSILON_SLACK * math.sqrt(spec.n * spec.L) * spec.noise_sigma
    else:
        epsilon = 0.0
    problem = MmvProblem(A=A, B=B, epsilon=epsilon)
    return GroundTruthInstance(problem=problem, X_true=X, support_true=support, spec=spec)


def export_instance(instance, prefix):
    """Write A/X/B as exchange CSVs plus a key-value sidecar of the spec."""
    write_matrix(f"{prefix}_A.csv", instance.problem.A.entries)
    write_matrix(f"{prefix}_X.csv", instance.X_true)
    write_matrix(f"{prefix}_B.csv", instance.problem.B)
    spec = instance.spec
    with open(f"{prefix}_spec.txt", "w") as fh:
        for name in ("n", "N", "L", "k", "rank", "noise_sigma", "matrix_kind", "seed"):
            fh.write(f"{name} = {getattr(spec, name)}\n")


def import_instance(prefix):
    """Rebuild an exported instance; the matrix certification is recomputed."""
    fields = {}
    with open(f"{prefix}_spec.txt") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            fields[key.strip()] = value.strip()
    spec = ProblemSpec(
        n=int(fields["n"]),
        N=int(fields["N"]),
        L=int(fields["L"]),
        k=int(fields["k"]),
        rank=int(fields["rank"]),
        noise_sigma=float(fields.get("noise_sigma", 0.0)),
        matrix_kind=fields.get("matrix_kind", MATRIX_ROW_ORTHONORMAL),
        seed=int(fields.get("seed", 0)),
    )
    A = MeasurementMatrix.from_entries(read_matrix(f"{prefix}_A.csv"))
    X = read_matrix(f"{prefix}_X.csv")
    B = read_matrix(f"{prefix}_B.csv")
    epsilon = (
        EPSILON_SLACK * math.sqrt(spec.n * spec.L) * spec.noise_sigma
        if spec.noise_sigma > 0
        else 0.0
    )
    problem = MmvProblem(A=A, B=B, epsilon=epsilon)
    support = SupportSet(tuple(int(i) for i in np.flatnonzero((X != 0).any(axis=1))))
    return GroundTruthInstance(problem=problem, X_true=X, support_true=support, spec=spec)
