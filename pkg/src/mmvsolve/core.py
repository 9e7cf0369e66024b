"""Dense-matrix primitives shared by all jointly row-sparse recovery solvers.

Conventions: the unknown signal is an N x L real matrix with few nonzero
rows (all L channels share one support). Measurements are n x L with
n <= N in the regime the solvers target. All storage is dense.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

# Per-entry tolerance for certifying A @ A.T = c * I, relative to c.
ROW_ORTHO_TOL = 1e-10

# Brute-force spark enumerates column subsets; refuse anything bigger.
SPARK_MAX_COLUMNS = 20


class InvalidArgumentError(ValueError):
    """An argument violates an operation's contract."""


class SizeLimitError(InvalidArgumentError):
    """Input exceeds a hard size limit guarding exponential-cost routines."""


class DegenerateInputError(ValueError):
    """Input matrix lacks the rank or conditioning an operation requires."""


class InfeasibleProblemError(RuntimeError):
    """No point satisfies the data-consistency constraint."""


def as_matrix(X, name="matrix"):
    """Validate and return a finite, nonempty 2-D float array."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise InvalidArgumentError(
            f"{name} must be a nonempty 2-D array, got shape {X.shape}"
        )
    if not np.isfinite(X).all():
        raise InvalidArgumentError(f"{name} contains NaN or infinite entries")
    return X


@dataclass(frozen=True)
class SupportSet:
    """Strictly increasing row indices marking a known or detected support."""

    indices: tuple[int, ...] = ()

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if any(i < 0 for i in idx):
            raise InvalidArgumentError("support indices must be nonnegative")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise InvalidArgumentError(
                "support indices must be strictly increasing (no duplicates)"
            )
        object.__setattr__(self, "indices", idx)

    @classmethod
    def from_indices(cls, indices):
        """Build a support from any iterable of indices (sorted, deduplicated)."""
        return cls(tuple(sorted({int(i) for i in indices})))

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, i):
        return i in self.indices

    def validate_for(self, n_rows):
        if self.indices and self.indices[-1] >= n_rows:
            raise InvalidArgumentError(
                f"support index {self.indices[-1]} out of range for {n_rows} rows"
            )

    def as_array(self):
        return np.asarray(self.indices, dtype=int)

    def mask(self, n_rows):
        """Boolean vector of length n_rows, True on the support."""
        self.validate_for(n_rows)
        m = np.zeros(n_rows, dtype=bool)
        m[list(self.indices)] = True
        return m


@dataclass(frozen=True, eq=False)
class MeasurementMatrix:
    """n x N sensing matrix, optionally certified to satisfy A @ A.T = c * I.

    The certificate (``row_orthonormal`` with scale ``row_gram_scale``) lets
    solvers use a closed-form feasibility projection. Build instances with
    :meth:`from_entries` to certify automatically.
    """

    entries: np.ndarray
    row_orthonormal: bool = False
    row_gram_scale: float | None = None

    def __post_init__(self):
        entries = as_matrix(self.entries, "measurement matrix")
        object.__setattr__(self, "entries", entries)
        if entries.shape[0] > entries.shape[1]:
            warnings.warn(
                "measurement matrix has more rows than columns; the solvers "
                "target the underdetermined regime",
                stacklevel=2,
            )
        if self.row_orthonormal:
            c = self.row_gram_scale
            if c is None or not np.isfinite(c) or c <= 0:
                raise InvalidArgumentError(
                    "row_orthonormal requires a positive row_gram_scale"
                )
            gram = entries @ entries.T
            dev = np.abs(gram - c * np.eye(gram.shape[0])).max()
            if dev > ROW_ORTHO_TOL * c:
                raise InvalidArgumentError(
                    f"row-orthonormality certificate fails: max|A A^T - cI| = {dev:g}"
                )

    @classmethod
    def from_entries(cls, entries):
        """Wrap a raw array, certifying A @ A.T = c * I when it holds."""
        entries = as_matrix(entries, "measurement matrix")
        gram = entries @ entries.T
        c = float(np.trace(gram) / gram.shape[0])
        if c > 0 and np.abs(gram - c * np.eye(gram.shape[0])).max() <= ROW_ORTHO_TOL * c:
            return cls(entries, row_orthonormal=True, row_gram_scale=c)
        return cls(entries)

    @property
    def n(self):
        return self.entries.shape[0]

    @property
    def N(self):
        return self.entries.shape[1]


@dataclass(eq=False)
class MmvProblem:
    """Measurements B of a row-sparse unknown, with a Frobenius noise ball.

    The feasible set is {alpha : ||A Psi alpha - B||_F <= epsilon}. epsilon = 0
    demands exact consistency. ``Psi``, when given, is an orthonormal N x N
    sparsifying transform and the recovered signal is X = Psi alpha; by
    default Psi is the identity and X = alpha. Treat instances as immutable.
    """

    A: MeasurementMatrix
    B: np.ndarray
    epsilon: float = 0.0
    Psi: np.ndarray | None = None

    def __post_init__(self):
        if not isinstance(self.A, MeasurementMatrix):
            self.A = MeasurementMatrix.from_entries(self.A)
        self.B = as_matrix(self.B, "measurement block")
        if self.B.shape[0] != self.A.n:
            raise InvalidArgumentError(
                f"measurement block has {self.B.shape[0]} rows, expected {self.A.n}"
            )
        self.epsilon = float(self.epsilon)
        if not np.isfinite(self.epsilon) or self.epsilon < 0:
            raise InvalidArgumentError("epsilon must be finite and nonnegative")
        if self.Psi is not None:
            P = as_matrix(self.Psi, "sparsifying transform")
            if P.shape != (self.A.N, self.A.N):
                raise InvalidArgumentError("Psi must be square N x N")
            dev = np.abs(P.T @ P - np.eye(P.shape[0])).max()
            if dev > ROW_ORTHO_TOL:
                raise InvalidArgumentError(
                    f"Psi is not orthonormal: max|Psi^T Psi - I| = {dev:g}"
                )
            self.Psi = P

    @property
    def n(self):
        return self.A.n

    @property
    def N(self):
        return self.A.N

    @property
    def L(self):
        return self.B.shape[1]

    @cached_property
    def phi(self):
        """The combined operator A @ Psi acting on coefficients."""
        if self.Psi is None:
            return self.A.entries
        return self.A.entries @ self.Psi

    def signal_from_coefficients(self, alpha):
        """Map coefficients back to the signal domain (X = Psi alpha)."""
        if self.Psi is None:
            return alpha
        return self.Psi @ alpha

    def coefficients_from_signal(self, X):
        if self.Psi is None:
            return X
        return self.Psi.T @ X

    def residual_norm(self, alpha):
        return float(np.linalg.norm(self.phi @ alpha - self.B))


def row_norms(X, q=2):
    """Per-row l_q norms of a matrix; q must be 1, 2 or inf."""
    X = as_matrix(X)
    if q == 1:
        return np.abs(X).sum(axis=1)
    if q == 2:
        return np.sqrt((X * X).sum(axis=1))
    if q == np.inf:
        return np.abs(X).max(axis=1)
    raise InvalidArgumentError(f"unsupported inner norm order {q!r}; use 1, 2 or inf")


def mixed_norm(X, p=1, q=2):
    """l_p norm of the vector of per-row l_q norms.

    The (1, 2) pair is the joint-sparsity surrogate used by the solvers:
    the sum of row l2 norms, which couples all channels of a row.
    """
    r = row_norms(X, q)
    if p == 1:
        return float(r.sum())
    if p == 2:
        return float(np.sqrt((r * r).sum()))
    raise InvalidArgumentError(f"unsupported outer norm order {p!r}; use 1 or 2")


def hard_threshold_rows(X, k):
    """Keep the k rows of largest l2 norm, zero all others.

    Ties are broken toward the lower row index so repeated runs select
    identical supports. Returns the thresholded matrix and the kept rows.
    """
    X = as_matrix(X)
    if int(k) != k or k < 1:
        raise InvalidArgumentError(f"k must be a positive integer, got {k!r}")
    k = int(k)
    N = X.shape[0]
    if k >= N:
        return X.copy(), SupportSet(tuple(range(N)))
    order = np.argsort(-row_norms(X, 2), kind="stable")
    keep = np.sort(order[:k])
    out = np.zeros_like(X)
    out[keep] = X[keep]
    return out, SupportSet(tuple(int(i) for i in keep))


def row_support(X, tol=0.0):
    """Indices of rows whose l2 norm exceeds tol, ascending."""
    if tol < 0:
        raise InvalidArgumentError("tol must be nonnegative")
    norms = row_norms(X, 2)
    return SupportSet(tuple(int(i) for i in np.flatnonzero(norms > tol)))


def _numerical_rank(M, rank_tol):
    sv = np.linalg.svd(M, compute_uv=False)
    if sv.size == 0 or sv[0] == 0:
        return 0
    return int((sv > rank_tol * sv[0]).sum())


def spark(A, rank_tol=1e-10):
    """Smallest number of linearly dependent columns, by brute force.

    Rank decisions use singular values relative to each subset's largest
    one, so this is a numerical spark rather than an exact-arithmetic one.
    Returns N + 1 when all N columns are independent. Only matrices with at
    most ``SPARK_MAX_COLUMNS`` columns are accepted (the enumeration cost is
    exponential): this is a toy-scale uniqueness checker, not a production
    primitive.
    """
    M = A.entries if isinstance(A, MeasurementMatrix) else as_matrix(A)
    N = M.shape[1]
    if N > SPARK_MAX_COLUMNS:
        raise SizeLimitError(
            f"spark is brute-force only; refusing N = {N} > {SPARK_MAX_COLUMNS} columns"
        )
    if rank_tol < 0:
        raise InvalidArgumentError("rank_tol must be nonnegative")
    r = _numerical_rank(M, rank_tol)
    if r == N:
        return N + 1
    for s in range(1, r + 1):
        for cols in itertools.combinations(range(N), s):
            if _numerical_rank(M[:, cols], rank_tol) < s:
                return s
    # every subset of size <= r is independent, so any r+1 columns are not
    return r + 1


def row_orthonormalize(A):
    """Rescale a full-row-rank matrix so its rows are exactly orthonormal.

    Returns a certified :class:`MeasurementMatrix` spanning the same row
    space with A_tilde @ A_tilde.T = I. Any measurement block tied to the
    original matrix must be co-transformed by the caller; this routine only
    touches the operator.
    """
    M = A.entries if isinstance(A, MeasurementMatrix) else as_matrix(A)
    Q, R = np.linalg.qr(M.T, mode="reduced")
    diag = np.diag(R)
    mags = np.abs(diag)
    if mags.max() == 0 or mags.min() <= 1e-12 * mags.max():
        raise DegenerateInputError("matrix is rank deficient; rows cannot be orthonormalized")
    # fix the QR sign ambiguity so already-orthonormal inputs round-trip
    signs = np.where(diag >= 0, 1.0, -1.0)
    At = (Q * signs).T
    gram = At @ At.T
    dev = np.abs(gram - np.eye(gram.shape[0])).max()
    if dev > ROW_ORTHO_TOL:
        raise DegenerateInputError(
            f"orthonormalization failed certification: max|A A^T - I| = {dev:g}"
        )
    return MeasurementMatrix(np.ascontiguousarray(At), row_orthonormal=True, row_gram_scale=1.0)


def write_matrix(path, X):
    """Write a matrix as plain CSV: one row per line, 17-digit floats, no header."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    np.savetxt(path, X, fmt="%.17e", delimiter=",")


def read_matrix(path):
    """Read a matrix written by :func:`write_matrix` (or any numeric CSV)."""
    M = np.loadtxt(path, delimiter=",", ndmin=2)
    return as_matrix(M, f"matrix from {path}")
