import numpy as np
import pytest

from mmvsolve import (
    InvalidArgumentError,
    MeasurementMatrix,
    MmvProblem,
    NestaConfig,
    ProblemSpec,
    SmoothingConfig,
    SupportSet,
    gen_instance,
    initial_state,
    iterative_nesta,
    nesta_solve,
    nesta_step,
)

# hand-fixed instance with exact gram A A^T = 2 I
A_FIXED = np.array([[1.0, 1.0, 0.0], [1.0, -1.0, 0.0]])
B_FIXED = np.array([[0.5, -0.25], [1.0, 0.75]])
ALPHA0_FIXED = np.array([[0.1, -0.2], [0.3, 0.45], [-0.5, 0.6]])


def fixed_problem(eps=0.25):
    M = MeasurementMatrix.from_entries(A_FIXED)
    assert M.row_orthonormal and M.row_gram_scale == 2.0
    return MmvProblem(A=M, B=B_FIXED, epsilon=eps)


def literal_iteration(alpha0, mu, eps, steps):
    """Transcription of the accelerated scheme written independently:
    gradient of the Huber row objective, ball projection in closed form
    (gram scale 2), history weights (i+1)/2, tau = 2/(k+3)."""

    def grad(X):
        g = np.zeros_like(X)
        for j in range(X.shape[0]):
            t = np.sqrt((X[j] ** 2).sum())
            g[j] = X[j] / mu if t < mu else X[j] / t
        return g

    def proj(q):
        r = A_FIXED @ q - B_FIXED
        rho = np.sqrt((r**2).sum())
        if rho <= eps:
            return q
        return q - (1.0 - eps / rho) * 0.5 * (A_FIXED.T @ r)

    alpha = alpha0.copy()
    accum = np.zeros_like(alpha0)
    out = []
    for k in range(steps):
        g = grad(alpha)
        y = proj(alpha - mu * g)
        accum = accum + ((k + 1) / 2.0) * g
        z = proj(alpha0 - mu * accum)
        tau = 2.0 / (k + 3)
        alpha = tau * z + (1 - tau) * y
        out.append((y, z, alpha))
    return out


def test_step_constants_at_k0():
    # tau_0 = 2/3 and history weight 1/2 on the very first iteration
    problem = fixed_problem()
    sm = SmoothingConfig(mu=0.5)
    state = initial_state(ALPHA0_FIXED)
    new = nesta_step(state, problem, sm)
    g = np.zeros_like(ALPHA0_FIXED)
    for j in range(3):
        t = np.linalg.norm(ALPHA0_FIXED[j])
        g[j] = ALPHA0_FIXED[j] / 0.5 if t < 0.5 else ALPHA0_FIXED[j] / t
    assert np.allclose(new.grad_accum, 0.5 * g, atol=1e-15)
    assert np.allclose(new.alpha, (2.0 / 3.0) * new.z + (1.0 / 3.0) * new.y, atol=1e-15)
    assert new.k == 1


def test_zero_problem_is_fixed_point():
    A = MeasurementMatrix.from_entries(np.eye(4)[:2])
    problem = MmvProblem(A=A, B=np.zeros((2, 3)), epsilon=0.0)
    sm = SmoothingConfig(mu=0.1)
    state = initial_state(np.zeros((4, 3)))
    for _ in range(5):
        state = nesta_step(state, problem, sm)
        assert np.array_equal(state.alpha, np.zeros((4, 3)))
        assert np.array_equal(state.y, np.zeros((4, 3)))
        assert np.array_equal(state.z, np.zeros((4, 3)))


def test_step_matches_literal_transcription():
    problem = fixed_problem()
    sm = SmoothingConfig(mu=0.5)
    reference = literal_iteration(ALPHA0_FIXED, mu=0.5, eps=0.25, steps=25)
    state = initial_state(ALPHA0_FIXED)
    for y_ref, z_ref, alpha_ref in reference:
        state = nesta_step(state, problem, sm)
        assert np.abs(state.y - y_ref).max() <= 1e-12
        assert np.abs(state.z - z_ref).max() <= 1e-12
        assert np.abs(state.alpha - alpha_ref).max() <= 1e-12


def test_iterates_stay_feasible():
    problem = fixed_problem(eps=0.25)
    sm = SmoothingConfig(mu=0.3)
    state = initial_state(ALPHA0_FIXED)
    for _ in range(30):
        state = nesta_step(state, problem, sm)
        assert np.linalg.norm(A_FIXED @ state.y - B_FIXED) <= 0.25 + 1e-9
        assert np.linalg.norm(A_FIXED @ state.z - B_FIXED) <= 0.25 + 1e-9


def test_zero_data_returns_zero_estimate():
    A = MeasurementMatrix.from_entries(np.eye(6)[:3])
    problem = MmvProblem(A=A, B=np.zeros((3, 2)), epsilon=0.5)
    report = nesta_solve(problem)
    assert np.array_equal(report.estimate, np.zeros((6, 2)))
    assert report.converged and report.inner_iterations == 0


def test_noiseless_single_row_recovery_matches_pinv_oracle():
    inst = gen_instance(ProblemSpec(n=10, N=20, L=3, k=1, rank=1, seed=4))
    report = nesta_solve(inst.problem)
    rows = inst.support_true.as_array()
    A = inst.problem.A.entries
    oracle = np.zeros_like(inst.X_true)
    oracle[rows] = np.linalg.pinv(A[:, rows]) @ inst.problem.B
    rel = np.linalg.norm(report.estimate - oracle) / np.linalg.norm(oracle)
    assert rel < 1e-4
    assert report.final_residual <= inst.problem.epsilon + 1e-6


def smv_reference(A, b, eps, stages=4, max_inner=5000, window=10, tol=1e-7):
    """Single-vector solver written independently on 1-D arrays."""
    gram = A @ A.T
    c = float(np.trace(gram) / gram.shape[0])
    assert np.abs(gram - c * np.eye(gram.shape[0])).max() <= 1e-10 * c

    def proj(q):
        r = A @ q - b
        rho = np.linalg.norm(r)
        if rho <= eps:
            return q
        return q - (1 - eps / rho) * (1 / c) * (A.T @ r)

    def grad(x, mu):
        ax = np.abs(x)
        return x / np.where(ax >= mu, ax, mu)

    def objective(x, mu):
        ax = np.abs(x)
        return float(np.where(ax >= mu, ax - 0.5 * mu, 0.5 * ax * ax / mu).sum())

    corr = A.T @ b
    scale = np.abs(corr).max()
    mu0, mu_final = 0.9 * scale, 1e-4 * scale
    ratio = (mu_final / mu0) ** (1.0 / stages)
    x = proj(corr)
    for i in range(stages):
        mu = mu0 * ratio ** (i + 1)
        anchor = x.copy()
        accum = np.zeros_like(x)
        alpha = anchor
        trace = []
        for k in range(max_inner):
            g = grad(alpha, mu)
            y = proj(alpha - mu * g)
            accum = accum + ((k + 1) / 2.0) * g
            z = proj(anchor - mu * accum)
            alpha = (2.0 / (k + 3)) * z + (1 - 2.0 / (k + 3)) * y
            trace.append(objective(y, mu))
            if len(trace) >= window:
                w = trace[-window:]
                if max(w) - min(w) <= tol * max(abs(sum(w) / len(w)), 1e-30):
                    break
        x = y
    return x


def test_single_column_reduces_to_vector_solver():
    inst = gen_instance(ProblemSpec(n=16, N=32, L=1, k=3, rank=1, seed=5))
    report = nesta_solve(inst.problem)
    ref = smv_reference(inst.problem.A.entries, inst.problem.B[:, 0], 0.0)
    assert np.abs(report.estimate[:, 0] - ref).max() <= 1e-8


def test_objective_trace_windowed_decrease():
    # accelerated iterations ripple; the testable monotonicity is windowed:
    # each stage's final window satisfies the stopping functional and the
    # stage ends no higher than where its first window ended
    inst = gen_instance(ProblemSpec(n=32, N=64, L=4, k=8, rank=4, seed=2))
    cfg = NestaConfig()
    report = nesta_solve(inst.problem, cfg=cfg)
    assert report.converged
    pos = 0
    for length in report.stage_iterations:
        seg = report.objective_trace[pos : pos + length]
        pos += length
        assert len(seg) >= cfg.stop_window
        window = seg[-cfg.stop_window :]
        level = max(abs(sum(window) / len(window)), 1e-30)
        assert max(window) - min(window) <= cfg.stop_tol * level
        first = seg[cfg.stop_window - 1]
        assert seg[-1] <= first + cfg.stop_tol * max(first, 1e-30)


def test_known_support_masking_speeds_up_hard_instances():
    iters_blind, iters_seeded = [], []
    for seed in range(20):
        inst = gen_instance(ProblemSpec(n=32, N=64, L=4, k=8, rank=4, seed=seed))
        blind = nesta_solve(inst.problem)
        half = SupportSet(tuple(inst.support_true)[:4])
        seeded = nesta_solve(inst.problem, SmoothingConfig(known_support=half))
        iters_blind.append(blind.inner_iterations)
        iters_seeded.append(seeded.inner_iterations)
    assert np.median(iters_seeded) < np.median(iters_blind)


def test_epsilon_zero_requires_consistent_data():
    A = MeasurementMatrix.from_entries(np.eye(3)[:2])
    B = np.array([[0.0, 0.0], [0.0, 0.0]])
    problem = MmvProblem(A=A, B=B, epsilon=0.0)
    report = nesta_solve(problem)  # zero data, trivially consistent
    assert np.array_equal(report.estimate, np.zeros((3, 2)))


def test_iterative_nesta_validation():
    inst = gen_instance(ProblemSpec(n=8, N=12, L=2, k=2, rank=2, seed=0))
    with pytest.raises(InvalidArgumentError):
        iterative_nesta(inst.problem, 0)
    with pytest.raises(InvalidArgumentError):
        iterative_nesta(inst.problem, 12)


def test_iterative_nesta_recovers_support():
    inst = gen_instance(ProblemSpec(n=12, N=24, L=4, k=3, rank=3, seed=9))
    report = iterative_nesta(inst.problem, 3)
    assert report.detected_support == inst.support_true
    rel = np.linalg.norm(report.estimate - inst.X_true) / np.linalg.norm(inst.X_true)
    assert rel < 1e-3
    assert report.outer_iterations <= 10


def test_iterative_nesta_stops_on_first_pass_with_full_seed():
    # full-rank data: the subspace seed already equals the thresholded
    # support, so the loop exits after a single pass
    inst = gen_instance(
        ProblemSpec(n=12, N=24, L=4, k=4, rank=4, matrix_kind="gaussian", seed=3)
    )
    report = iterative_nesta(inst.problem, 4, use_music=True)
    assert report.outer_iterations == 1
    assert report.detected_support == inst.support_true
    assert report.converged


def test_iterative_nesta_cutoff_threshold_mode():
    inst = gen_instance(ProblemSpec(n=12, N=24, L=4, k=3, rank=3, seed=9))
    report = iterative_nesta(inst.problem, 3, threshold_mode="cutoff")
    assert report.detected_support == inst.support_true
    with pytest.raises(InvalidArgumentError):
        iterative_nesta(inst.problem, 3, threshold_mode="soft")
    with pytest.raises(InvalidArgumentError):
        iterative_nesta(inst.problem, 3, cutoff_fraction=1.5)


def test_iterative_nesta_boundary_k():
    inst = gen_instance(ProblemSpec(n=8, N=10, L=2, k=2, rank=2, seed=1))
    report = iterative_nesta(inst.problem, 9, max_outer=4)
    assert report.final_residual <= inst.problem.epsilon + 1e-6
    assert len(report.detected_support) == 9
    assert report.outer_iterations <= 4


def test_solve_with_sparsifying_transform():
    # coefficients are row-sparse in a non-canonical orthonormal basis
    rng = np.random.default_rng(31)
    N, n, L, k = 24, 12, 3, 2
    Psi = np.linalg.qr(rng.standard_normal((N, N)))[0]
    inst = gen_instance(ProblemSpec(n=n, N=N, L=L, k=k, rank=2, seed=6))
    alpha_true = inst.X_true  # row-sparse coefficients
    A = inst.problem.A
    X_true = Psi @ alpha_true
    problem = MmvProblem(A=A, B=A.entries @ X_true, epsilon=0.0, Psi=Psi)
    report = nesta_solve(problem)
    rel = np.linalg.norm(report.estimate - X_true) / np.linalg.norm(X_true)
    assert rel < 1e-3
    alpha_hat = problem.coefficients_from_signal(report.estimate)
    assert np.linalg.norm(alpha_hat - alpha_true) / np.linalg.norm(alpha_true) < 1e-3
    # support detection happens in the coefficient domain
    assert report.detected_support == inst.support_true


def test_config_validation():
    with pytest.raises(InvalidArgumentError):
        NestaConfig(stop_window=1)
    with pytest.raises(InvalidArgumentError):
        NestaConfig(mu_final=0.0)
    with pytest.raises(InvalidArgumentError):
        NestaConfig(epsilon=-0.5)
