"""Subspace-based joint support detection (MUSIC).

The left singular vectors of the measurement block span the signal
subspace; dictionary columns nearly inside that subspace are support
candidates. Scores are normalized subspace residuals in [0, 1]: 0 means
the column lies in the signal subspace, 1 means orthogonal to it. When
the data has full column rank equal to the sparsity level, the smallest
scores identify the support exactly; with rank-deficient data the scores
still give a useful partial seed, which is how the solvers consume them.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import InvalidArgumentError, SupportSet, as_matrix


@dataclass(frozen=True)
class MusicResult:
    rank: int
    scores: np.ndarray
    support: SupportSet


def estimate_rank(B, delta):
    """Number of singular values of B above delta times the largest."""
    B = as_matrix(B, "measurement block")
    if not 0 < delta < 1:
        raise InvalidArgumentError(f"delta must lie in (0, 1), got {delta!r}")
    sv = np.linalg.svd(B, compute_uv=False)
    if sv[0] == 0:
        return 0
    return int((sv > delta * sv[0]).sum())


def music_scores(problem, r):
    """Normalized residual of each dictionary column against the signal subspace.

    score_j = ||(I - U_s U_s^T) phi_j|| / ||phi_j|| with U_s the top-r left
    singular vectors of B. Zero columns cannot be scored and get score 1.
    """
    n_sv = min(problem.n, problem.L)
    if int(r) != r or not 1 <= r <= n_sv:
        raise InvalidArgumentError(
            f"subspace dimension r must be an integer in [1, {n_sv}], got {r!r}"
        )
    U, _, _ = np.linalg.svd(problem.B)
    Us = U[:, : int(r)]
    phi = problem.phi
    col_norms = np.sqrt((phi * phi).sum(axis=0))
    zero_cols = col_norms == 0
    if zero_cols.any():
        warnings.warn(
            f"{int(zero_cols.sum())} zero dictionary column(s); scoring them 1",
            stacklevel=2,
        )
    resid = phi - Us @ (Us.T @ phi)
    safe = np.where(zero_cols, 1.0, col_norms)
    scores = np.sqrt((resid * resid).sum(axis=0)) / safe
    scores[zero_cols] = 1.0
    return scores


def music_support(problem, k, delta=1e-8):
    """Select the k most subspace-consistent columns as a support estimate.

    The subspace dimension is estimated from the data's singular values with
    relative threshold ``delta`` (suited to noiseless synthetic data; pick a
    larger value explicitly for noisy runs). Ties keep the lowest index.
    """
    if int(k) != k or not 1 <= k < problem.N:
        raise InvalidArgumentError(f"k must be an integer in [1, N), got {k!r}")
    k = int(k)
    r = estimate_rank(problem.B, delta)
    if r == 0:
        # no signal subspace at all; every column is equally implausible
        scores = np.ones(problem.N)
    else:
        scores = music_scores(problem, r)
    order = np.argsort(scores, kind="stable")
    chosen = SupportSet(tuple(sorted(int(i) for i in order[:k])))
    return MusicResult(rank=r, scores=scores, support=chosen)
