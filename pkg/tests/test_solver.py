import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rank1recon import (CGConvergenceWarning, DegenerateModelError, EmbeddingGeometry,
                        Hyperparams, ObservationMask, ParameterError, Rank1Model, SignalSpec,
                        SolverConfig, SolverError, als_solve, generate, monte_carlo_solve,
                        objective, qv_reconstruct, reconstruct, scale_hyperparameters,
                        update_a, update_b, update_sigma)
from rank1recon.cg import conjugate_gradient
from rank1recon.model import data_fit
from rank1recon.solver import (SolverReport, _conv_matrix_in_a, _conv_matrix_in_b,
                               _dense_solve, _dual_solve, gaussian_init, select_best)

from oracles import dense_normal_a, dense_normal_b, difference_matrix, qv_dense

CG = SolverConfig(linear_solver="cg", cg_tol=1e-12, cg_max_iters=5000)
DIRECT = SolverConfig(linear_solver="direct")


def random_instance(seed, n=12, tau=4, observed_fraction=0.7):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(n + tau - 1)
    b = rng.standard_normal(tau)
    model = Rank1Model(a / np.linalg.norm(a), b / np.linalg.norm(b), rng.uniform(0.5, 2.0))
    y = rng.standard_normal(n)
    observed = rng.random(n) < observed_fraction
    observed[:2] = True
    return model, y, observed


def rel_err(x, ref):
    return np.linalg.norm(x - ref) / np.linalg.norm(ref)


# ---------------------------------------------------------------- linear algebra

def test_conv_matrices_match_operator():
    rng = np.random.default_rng(0)
    n, tau = 9, 4
    a, b = rng.standard_normal(n + tau - 1), rng.standard_normal(tau)
    from rank1recon import inverse_embed_rank1
    np.testing.assert_allclose(_conv_matrix_in_a(b, n) @ a, inverse_embed_rank1(a, b), atol=1e-14)
    np.testing.assert_allclose(_conv_matrix_in_b(a, tau) @ b, inverse_embed_rank1(a, b), atol=1e-14)


def test_dual_solve_matches_dense():
    rng = np.random.default_rng(1)
    m, rows = 60, 20
    design = rng.standard_normal((rows, m))
    t = rng.standard_normal(rows)
    rho = 0.05
    L = difference_matrix(m)
    ref = np.linalg.solve(design.T @ design + rho * L.T @ L, design.T @ t)
    assert rel_err(_dual_solve(design, rho, t), ref) < 1e-9
    assert rel_err(_dense_solve(design, 1.0, rho, t), ref) < 1e-9


def test_dual_solve_constant_mode_invisible():
    # rows orthogonal to the constant vector leave the DC mode undetermined
    m = 16
    design = np.zeros((2, m))
    design[0, :2] = [1.0, -1.0]
    design[1, 5:7] = [1.0, -1.0]
    x = _dual_solve(design, 0.1, np.array([1.0, 2.0]))
    assert abs(x.sum()) < 1e-10
    L = difference_matrix(m)
    grad = design.T @ (design @ x - [1.0, 2.0]) + 0.1 * L.T @ L @ x
    assert np.linalg.norm(grad) < 1e-10


def test_dense_solve_singular_gives_minimum_norm():
    # only the first unknown is observable and there is no penalty
    design = np.zeros((3, 5))
    design[:, 0] = 1.0
    x = _dense_solve(design, 1.0, 0.0, np.array([1.0, 2.0, 3.0]))
    np.testing.assert_allclose(x, [2.0, 0, 0, 0, 0], atol=1e-12)


def test_cg_solves_spd_system():
    rng = np.random.default_rng(2)
    Q = rng.standard_normal((30, 30))
    A = Q @ Q.T + 30 * np.eye(30)
    rhs = rng.standard_normal(30)
    res = conjugate_gradient(lambda v: A @ v, rhs, tol=1e-12, max_iters=200)
    assert res.converged
    assert rel_err(res.x, np.linalg.solve(A, rhs)) < 1e-10


def test_cg_zero_rhs():
    res = conjugate_gradient(lambda v: v, np.zeros(4), x0=np.ones(4))
    assert res.converged and not res.x.any()


def test_cg_iteration_cap_returns_best():
    A = np.diag(np.logspace(0, 8, 50))
    res = conjugate_gradient(lambda v: A @ v, np.ones(50), tol=1e-14, max_iters=3)
    assert not res.converged
    assert res.iterations == 3
    assert np.linalg.norm(np.ones(50) - A @ res.x) / np.sqrt(50) == pytest.approx(
        res.relative_residual, rel=1e-6)


def test_cg_indefinite_breakdown():
    with pytest.raises(SolverError):
        conjugate_gradient(lambda v: -v, np.ones(3))


# ---------------------------------------------------------------- factor updates

@pytest.mark.parametrize("config", [CG, DIRECT, SolverConfig()], ids=["cg", "direct", "auto"])
@pytest.mark.parametrize("seed", range(5))
def test_update_a_matches_dense(config, seed):
    model, y, observed = random_instance(seed)
    lam = 0.05
    ref = dense_normal_a(model.a, model.b, model.sigma, y, observed, lam)
    got = update_a(model, y, observed, Hyperparams(lam, 0.0), config)
    assert rel_err(got, ref) < 1e-8


@pytest.mark.parametrize("config", [CG, DIRECT, SolverConfig()], ids=["cg", "direct", "auto"])
@pytest.mark.parametrize("seed", range(5))
def test_update_b_matches_dense(config, seed):
    model, y, observed = random_instance(seed)
    lam = 0.05
    ref = dense_normal_b(model.a, model.b, model.sigma, y, observed, lam)
    got = update_b(model, y, observed, Hyperparams(0.0, lam), config)
    assert rel_err(got, ref) < 1e-8


def test_update_a_sparse_observation_uses_dual_path():
    # 5 of 20 samples observed: 2|Omega| <= T, so the direct route goes dual
    model, y, _ = random_instance(7, n=20, tau=6)
    observed = np.zeros(20, bool)
    observed[[0, 4, 9, 13, 19]] = True
    ref = dense_normal_a(model.a, model.b, model.sigma, y, observed, 0.02)
    for config in (DIRECT, CG):
        assert rel_err(update_a(model, y, observed, Hyperparams(0.02, 0.0), config), ref) < 1e-8


def test_update_a_window_one_is_qv_equation():
    rng = np.random.default_rng(8)
    n = 15
    y = rng.standard_normal(n)
    observed = rng.random(n) < 0.6
    observed[0] = True
    a0 = rng.standard_normal(n)
    model = Rank1Model(a0 / np.linalg.norm(a0), [1.0], 1.0)
    lam = 0.3
    got = update_a(model, y, observed, Hyperparams(lam, 0.0), DIRECT)
    np.testing.assert_allclose(got, qv_dense(y, observed, lam), rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(got, qv_reconstruct(y, observed, lam), rtol=1e-10, atol=1e-12)


def test_update_a_consistent_system():
    model, _, _ = random_instance(9, n=10, tau=3)
    y = reconstruct(model)
    full = ObservationMask.full(10)
    a_new = update_a(model, y, full, Hyperparams(0.0, 0.0), DIRECT)
    fitted = Rank1Model(a_new, model.b, model.sigma)
    assert data_fit(fitted, y, full) < 1e-20 * (y @ y) + 1e-28


def test_update_b_window_one_is_scalar_least_squares():
    rng = np.random.default_rng(10)
    n = 8
    a = rng.standard_normal(n)
    a /= np.linalg.norm(a)
    y = rng.standard_normal(n)
    model = Rank1Model(a, [1.0], 1.5)
    b = update_b(model, y, None, Hyperparams(0.0, 0.4), DIRECT)
    z = model.sigma * a
    assert b.shape == (1,)
    assert b[0] == pytest.approx((z @ y) / (z @ z), rel=1e-12)


def test_update_b_zero_signal():
    model, _, observed = random_instance(11)
    for config in (CG, DIRECT):
        assert not update_b(model, np.zeros(12), observed, Hyperparams(0.1, 0.1), config).any()


def test_update_a_warns_on_cg_cap():
    model, y, observed = random_instance(12, n=30, tau=8)
    config = SolverConfig(linear_solver="cg", cg_max_iters=2, cg_tol=1e-14)
    with pytest.warns(CGConvergenceWarning):
        x = update_a(model, y, observed, Hyperparams(1e-4, 0.0), config)
    assert np.all(np.isfinite(x))


def test_update_sigma_exact_and_scaled():
    model, _, observed = random_instance(13)
    z = reconstruct(Rank1Model(model.a, model.b, 1.0))
    assert update_sigma(model, z, None) == pytest.approx(1.0, rel=1e-14)
    y = np.where(observed, 3.0 * z, 99.0)
    assert update_sigma(model, y, observed) == pytest.approx(3.0, rel=1e-14)


def test_update_sigma_matches_projection_formula():
    model, y, observed = random_instance(14)
    z = reconstruct(Rank1Model(model.a, model.b, 1.0))
    pz = z * observed
    assert update_sigma(model, y, observed) == pytest.approx((pz @ y) / (pz @ pz), rel=1e-13)


def test_update_sigma_degenerate():
    n, tau = 6, 2
    a = np.zeros(n + tau - 1)
    a[-1] = 1.0  # only reaches the last sample
    model = Rank1Model(a, [1.0, 0.0], 1.0)
    observed = np.r_[np.ones(n - 1, bool), False]
    with pytest.raises(DegenerateModelError):
        update_sigma(model, np.ones(n), observed)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_sigma_update_never_increases_fit(seed):
    model, y, observed = random_instance(seed, n=10, tau=3)
    new = Rank1Model(model.a, model.b, update_sigma(model, y, observed))
    assert data_fit(new, y, observed) <= data_fit(model, y, observed) * (1 + 1e-12) + 1e-15


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 16), st.data())
def test_direct_and_cg_agree(n, data):
    tau = data.draw(st.integers(1, n))
    seed = data.draw(st.integers(0, 2**32 - 1))
    model, y, observed = random_instance(seed, n=n, tau=tau)
    hp = Hyperparams(data.draw(st.floats(1e-3, 10)), data.draw(st.floats(1e-3, 10)))
    for update in (update_a, update_b):
        direct = update(model, y, observed, hp, DIRECT)
        with warnings.catch_warnings():
            # nearly singular draws can stall CG just above its tolerance
            warnings.simplefilter("ignore", CGConvergenceWarning)
            cg = update(model, y, observed, hp, CG)
        scale = max(np.linalg.norm(direct), 1e-12)
        assert np.linalg.norm(direct - cg) <= 1e-7 * scale


# ---------------------------------------------------------------- ALS

def sine(n=64, f=1 / 16):
    return generate(SignalSpec("sine", n=n, frequency=f))


def test_als_fits_noiseless_sine():
    y = sine()
    mask = ObservationMask.full(y.size)
    hp = scale_hyperparameters(0.1, 0.1, mask, EmbeddingGeometry(y.size, 16))
    report = als_solve(y, mask, hp, SolverConfig(max_outer_iters=300), tau=16)
    assert data_fit(report.final_model, y, mask) <= 1e-4 * (y @ y)


def test_als_report_invariants():
    y = sine()
    observed = np.abs(y) <= 0.6
    hp = scale_hyperparameters(1.0, 1.0, observed, EmbeddingGeometry(y.size, 16))
    report = als_solve(y, observed, hp, SolverConfig(max_outer_iters=40, rng_seed=3), tau=16)
    m = report.final_model
    assert np.linalg.norm(m.a) == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.norm(m.b) == pytest.approx(1.0, abs=1e-12)
    assert report.objective == pytest.approx(objective(m, y, observed, hp), rel=1e-10)
    assert report.objective <= report.objective_trajectory[0]
    assert len(report.objective_trajectory) == report.iterations_used + 1


def test_als_convergence_flag():
    y = sine(n=32, f=1 / 8)
    hp = Hyperparams(1.0, 1.0)
    report = als_solve(y, None, hp, SolverConfig(max_outer_iters=2000, outer_tol=1e-6), tau=8)
    assert report.converged
    t = report.objective_trajectory
    assert abs(t[-1] - t[-2]) <= 1e-6 * max(abs(t[-1]), abs(t[-2]))


def test_als_zero_signal_reaches_penalty_minimum():
    hp = Hyperparams(0.5, 0.5)
    report = als_solve(np.zeros(10), None, hp, SolverConfig(), tau=3)
    assert report.converged
    assert report.final_model.sigma == 0.0
    assert report.objective == pytest.approx(0.0, abs=1e-25)
    assert report.iterations_used <= 2


def test_als_requires_tau_or_init():
    with pytest.raises(ParameterError):
        als_solve(np.ones(5), None, Hyperparams(0.1, 0.1))
    with pytest.raises(ParameterError):
        als_solve(np.ones(5), None, Hyperparams(0.1, 0.1), init=(np.zeros(7), np.ones(3)))


def test_als_window_one_is_rescaled_qv():
    # at tau = 1 the a-update is a QV solve with weight lambda_a / sigma^2; the
    # following sigma update rescales it, so the fixed point is collinear
    # with that QV solution
    rng = np.random.default_rng(15)
    n = 40
    y = rng.standard_normal(n)
    observed = rng.random(n) < 0.7
    hp = Hyperparams(0.5, 0.1)
    report = als_solve(y, observed, hp, SolverConfig(max_outer_iters=500, outer_tol=1e-14),
                       tau=1)
    m = report.final_model
    x = reconstruct(m)
    q = qv_reconstruct(y, observed, hp.lambda_a / m.sigma**2)
    cosine = abs(x @ q) / (np.linalg.norm(x) * np.linalg.norm(q))
    assert cosine == pytest.approx(1.0, abs=1e-12)
    alpha = (q * observed) @ y / ((q * observed) @ q)
    np.testing.assert_allclose(x, alpha * q, rtol=1e-8, atol=1e-10)


# ---------------------------------------------------------------- Monte-Carlo

def test_single_restart_equals_seeded_als():
    y = sine(n=32, f=1 / 8)
    hp = Hyperparams(0.05, 0.05)
    config = SolverConfig(max_outer_iters=30, restarts_k=1, rng_seed=42)
    mc = monte_carlo_solve(y, None, hp, config, tau=8)
    init = gaussian_init(EmbeddingGeometry(32, 8), np.random.default_rng(42))
    single = als_solve(y, None, hp, config, init=init)
    np.testing.assert_array_equal(mc.objective_trajectory, single.objective_trajectory)
    np.testing.assert_array_equal(mc.final_model.a, single.final_model.a)
    assert mc.restart_index == 0


def test_monte_carlo_picks_minimum_and_is_deterministic():
    y0 = sine(n=64, f=1 / 16)
    y = np.clip(y0, -0.4, 0.4)
    observed = np.abs(y0) <= 0.4
    hp = scale_hyperparameters(0.1, 0.1, observed, EmbeddingGeometry(64, 16))
    config = SolverConfig(max_outer_iters=20, restarts_k=6, rng_seed=5)
    first = monte_carlo_solve(y, observed, hp, config, tau=16)
    second = monte_carlo_solve(y, observed, hp, config, tau=16)
    assert len(first.restart_objectives) == 6
    assert first.objective == min(first.restart_objectives)
    assert first.restart_objectives[first.restart_index] == first.objective
    np.testing.assert_array_equal(first.final_model.a, second.final_model.a)
    assert first.restart_objectives == second.restart_objectives


def _fake(obj, degenerate=False):
    model = Rank1Model(np.ones(3) / np.sqrt(3), [1.0], 0.0)
    return SolverReport(objective_trajectory=np.array([obj]), final_model=model,
                        degenerate=degenerate)


def test_select_best_ties_and_degenerate():
    assert select_best([_fake(2.0), _fake(1.0), _fake(1.0)]) == 1
    assert select_best([_fake(0.5, degenerate=True), _fake(1.0)]) == 1
    with pytest.raises(DegenerateModelError):
        select_best([_fake(1.0, degenerate=True)])


def test_solver_config_validation():
    with pytest.raises(ParameterError):
        SolverConfig(linear_solver="magic")
    with pytest.raises(ParameterError):
        SolverConfig(outer_tol=0)
    with pytest.raises(ParameterError):
        SolverConfig(restarts_k=0)
    g = EmbeddingGeometry(128, 128)
    assert SolverConfig().cg_cap(g) == 2000
    assert SolverConfig().cg_cap(EmbeddingGeometry(10, 3)) == 120
