import itertools

import numpy as np
import pytest

from mmvsolve import (
    DegenerateInputError,
    InvalidArgumentError,
    MeasurementMatrix,
    MmvProblem,
    SizeLimitError,
    SupportSet,
    hard_threshold_rows,
    mixed_norm,
    read_matrix,
    row_norms,
    row_orthonormalize,
    row_support,
    spark,
    write_matrix,
)


def test_row_norms_examples():
    assert np.allclose(row_norms([[3, 4], [0, 0]], 2), [5, 0])
    assert np.allclose(row_norms(np.eye(3), 1), [1, 1, 1])
    assert np.allclose(row_norms([[1, -2], [0.5, 0.5]], np.inf), [2, 0.5])


def test_row_norms_rejects_bad_order():
    with pytest.raises(InvalidArgumentError):
        row_norms([[1.0, 2.0]], 3)


def test_mixed_norm_examples():
    assert mixed_norm([[3, 4], [0, 0]], 1, 2) == pytest.approx(5)
    assert mixed_norm(np.eye(3), 1, 2) == pytest.approx(3)
    assert mixed_norm([[1, 1], [1, 1]], 2, 2) == pytest.approx(2)


def test_mixed_norm_rejects_bad_outer():
    with pytest.raises(InvalidArgumentError):
        mixed_norm([[1.0]], 3, 2)


def test_mixed_norm_zero_iff_zero_matrix():
    assert mixed_norm(np.zeros((4, 2))) == 0
    assert mixed_norm([[0, 0], [1e-150, 0]]) > 0


def test_row_norms_rejects_nonfinite():
    with pytest.raises(InvalidArgumentError):
        row_norms([[np.nan, 1.0]])


def test_norm_properties_on_random_matrices():
    rng = np.random.default_rng(42)
    for _ in range(25):
        N, L = rng.integers(1, 9), rng.integers(1, 5)
        X = rng.standard_normal((N, L))
        Y = rng.standard_normal((N, L))
        c = float(rng.normal())
        assert mixed_norm(X, 1, 2) == pytest.approx(row_norms(X, 2).sum())
        for p in (1, 2):
            for q in (1, 2, np.inf):
                assert mixed_norm(X + Y, p, q) <= mixed_norm(X, p, q) + mixed_norm(Y, p, q) + 1e-12
                assert mixed_norm(c * X, p, q) == pytest.approx(abs(c) * mixed_norm(X, p, q))


def test_hard_threshold_examples():
    out, supp = hard_threshold_rows([[3, 4], [1, 0], [0, 2]], 1)
    assert tuple(supp) == (0,)
    assert np.array_equal(out, [[3, 4], [0, 0], [0, 0]])

    X = np.arange(6.0).reshape(3, 2)
    out, supp = hard_threshold_rows(X, 3)
    assert np.array_equal(out, X)
    assert tuple(supp) == (0, 1, 2)

    out, supp = hard_threshold_rows(np.eye(2), 1)
    assert tuple(supp) == (0,)  # tie broken toward the lower index


def test_hard_threshold_rejects_bad_k():
    with pytest.raises(InvalidArgumentError):
        hard_threshold_rows(np.eye(2), 0)


def test_hard_threshold_idempotent():
    rng = np.random.default_rng(3)
    for _ in range(20):
        X = rng.standard_normal((7, 3))
        k = int(rng.integers(1, 8))
        once, s1 = hard_threshold_rows(X, k)
        twice, s2 = hard_threshold_rows(once, k)
        assert np.array_equal(once, twice)
        assert s1 == s2


def test_hard_threshold_is_best_k_row_approximation():
    # brute force over all supports at small N
    rng = np.random.default_rng(11)
    for _ in range(10):
        N, L = 6, 3
        X = rng.standard_normal((N, L))
        for k in (1, 2, 4):
            thresholded, _ = hard_threshold_rows(X, k)
            err = mixed_norm(X - thresholded, 1, 2)
            for S in itertools.combinations(range(N), k):
                Z = np.zeros_like(X)
                Z[list(S)] = X[list(S)]
                assert err <= mixed_norm(X - Z, 1, 2) + 1e-12


def test_row_support_examples():
    assert len(row_support(np.zeros((3, 2)), 0.0)) == 0
    assert tuple(row_support([[0, 0], [1e-12, 0], [2, 1]], 1e-9)) == (2,)
    assert tuple(row_support(np.eye(2), 0.0)) == (0, 1)


def test_support_set_validation():
    with pytest.raises(InvalidArgumentError):
        SupportSet((3, 1))
    with pytest.raises(InvalidArgumentError):
        SupportSet((1, 1))
    s = SupportSet.from_indices([4, 0, 4, 2])
    assert tuple(s) == (0, 2, 4)
    assert 2 in s and 3 not in s
    assert np.array_equal(s.mask(5), [True, False, True, False, True])
    with pytest.raises(InvalidArgumentError):
        s.mask(4)


def test_spark_examples():
    assert spark(np.eye(4)) == 5
    dup = np.array([[1.0, 1.0, 0.0], [2.0, 2.0, 1.0]])
    assert spark(dup) == 2
    # all single columns and pairs independent, the triple is dependent
    assert spark(np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])) == 3


def test_spark_matches_exhaustive_oracle():
    # independent oracle: enumerate every subset size and rank-test it
    rng = np.random.default_rng(7)

    def oracle(M, tol=1e-10):
        n, N = M.shape
        for s in range(1, N + 1):
            for cols in itertools.combinations(range(N), s):
                sv = np.linalg.svd(M[:, cols], compute_uv=False)
                rank = int((sv > tol * sv[0]).sum()) if sv[0] > 0 else 0
                if rank < s:
                    return s
        return N + 1

    for _ in range(5):
        M = rng.standard_normal((3, 6))
        assert spark(M) == oracle(M)
    # planted dependency: duplicate a column
    M = rng.standard_normal((4, 7))
    M[:, 5] = 2.0 * M[:, 2]
    assert spark(M) == oracle(M) == 2


def test_spark_invariants():
    rng = np.random.default_rng(19)
    for _ in range(10):
        n, N = int(rng.integers(2, 6)), int(rng.integers(2, 8))
        M = rng.standard_normal((n, N))
        s = spark(M)
        assert s >= 2
        full_rank = np.linalg.matrix_rank(M) == N
        assert (s == N + 1) == full_rank


def test_spark_refuses_large_matrices():
    with pytest.raises(SizeLimitError):
        spark(np.ones((2, 21)))


def test_row_orthonormalize_examples():
    A = row_orthonormalize(np.array([[2.0, 0.0, 0.0], [0.0, 0.0, 3.0]]))
    assert np.allclose(A.entries, [[1, 0, 0], [0, 0, 1]])
    assert A.row_orthonormal and A.row_gram_scale == 1.0

    # already orthonormal rows come back unchanged (sign-fixed QR)
    Q = np.array([[0.6, 0.8, 0.0], [-0.8, 0.6, 0.0]])
    out = row_orthonormalize(Q)
    assert np.allclose(out.entries, Q, atol=1e-12)


def test_row_orthonormalize_random():
    rng = np.random.default_rng(23)
    M = rng.standard_normal((4, 8))
    out = row_orthonormalize(M)
    gram = out.entries @ out.entries.T
    assert np.abs(gram - np.eye(4)).max() <= 1e-10
    # same row space: original rows are reproduced by projection onto the new rows
    proj = M @ out.entries.T @ out.entries
    assert np.allclose(proj, M, atol=1e-10)


def test_row_orthonormalize_rejects_rank_deficient():
    M = np.ones((3, 5))
    with pytest.raises(DegenerateInputError):
        row_orthonormalize(M)


def test_measurement_matrix_certification():
    M = MeasurementMatrix.from_entries([[1.0, 1.0, 0.0], [1.0, -1.0, 0.0]])
    assert M.row_orthonormal and M.row_gram_scale == pytest.approx(2.0)
    M2 = MeasurementMatrix.from_entries([[1.0, 2.0, 0.0], [1.0, -1.0, 0.0]])
    assert not M2.row_orthonormal
    with pytest.raises(InvalidArgumentError):
        MeasurementMatrix([[1.0, 2.0]], row_orthonormal=True, row_gram_scale=1.0)


def test_measurement_matrix_flags_overdetermined():
    with pytest.warns(UserWarning):
        MeasurementMatrix.from_entries(np.eye(3)[:, :2])


def test_mmv_problem_validation():
    A = MeasurementMatrix.from_entries(np.eye(3))
    with pytest.raises(InvalidArgumentError):
        MmvProblem(A=A, B=np.zeros((2, 1)))
    with pytest.raises(InvalidArgumentError):
        MmvProblem(A=A, B=np.zeros((3, 1)), epsilon=-1.0)
    with pytest.raises(InvalidArgumentError):
        MmvProblem(A=A, B=np.zeros((3, 1)), Psi=np.ones((3, 3)))
    prob = MmvProblem(A=A, B=np.ones((3, 2)), epsilon=0.5)
    assert (prob.n, prob.N, prob.L) == (3, 3, 2)
    assert prob.phi is A.entries  # identity transform adds no copy


def test_matrix_csv_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    X = rng.standard_normal((4, 3)) * 10.0 ** rng.integers(-8, 8, size=(4, 3))
    path = tmp_path / "m.csv"
    write_matrix(path, X)
    back = read_matrix(path)
    assert np.array_equal(back, X)  # 17 significant digits round-trip exactly
    write_matrix(path, np.array([[1.5]]))
    assert read_matrix(path).shape == (1, 1)
