import numpy as np
import pytest

from stochvi import constants as C
from stochvi import numerics
from stochvi.errors import ConfigError, MissingSecondDrawError
from stochvi.operators import QuadraticGame
from stochvi.sampling import SamplingScheme, draw, enumerate_support
from stochvi.solvers import (
    ConstantSchedule,
    RunConfig,
    ScoSwitchingSchedule,
    SgdaSwitchingSchedule,
    run,
    sampled_jacobian,
    sampled_value,
    solver_step,
    step_sizes,
    stochastic_hamiltonian_gradient,
)

from test_operators import random_game


def identity_game():
    # value(x) = x, equilibrium at the origin
    return QuadraticGame([[[1.0]]], [[[0.0]]], [[[1.0]]], [[0.0]], [[0.0]])


# ---------------------------------------------------------------------------
# schedules
# ---------------------------------------------------------------------------


def test_sgda_switching_constant_branch():
    sched = SgdaSwitchingSchedule(ell_xi=10.0, mu=1.0)
    assert sched.switch_point == 40
    assert step_sizes(sched, 40) == (0.05, 0.0)


def test_sgda_switching_decreasing_branch():
    sched = SgdaSwitchingSchedule(ell_xi=10.0, mu=1.0)
    alpha, gamma = step_sizes(sched, 41)
    assert alpha == pytest.approx(83 / 1764, rel=1e-15)
    assert gamma == 0.0


def test_sco_switching_constant_branch():
    sched = ScoSwitchingSchedule(ell_xi=4.0, cal_l_h=16.0, mu=1.0, mu_h=1.0)
    assert sched.switch_point == 64
    assert step_sizes(sched, 64) == (1 / 64, 1 / 64)


def test_switching_continuity_and_monotone_tail():
    sched = SgdaSwitchingSchedule(ell_xi=7.3, mu=0.9)
    s = sched.switch_point
    alpha_next, _ = sched.at(s + 1)
    assert alpha_next == pytest.approx(
        (2 * (s + 1) + 1) / ((s + 2) ** 2 * 0.9), rel=1e-15
    )
    prev = alpha_next
    for k in range(s + 2, s + 200):
        alpha, _ = sched.at(k)
        assert alpha <= prev + 1e-18
        assert alpha <= 1 / (2 * 7.3) + 1e-15
        prev = alpha


def test_sco_switching_mu_zero_branch():
    sched = ScoSwitchingSchedule(ell_xi=2.0, cal_l_h=8.0, mu=0.0, mu_h=0.5)
    assert sched.switch_point == int(np.ceil(8 * 8.0 / 0.5))
    alpha, gamma = sched.at(sched.switch_point + 1)
    assert alpha == gamma


def test_constant_schedule_validation():
    with pytest.raises(ConfigError):
        ConstantSchedule(alpha=-0.1)


# ---------------------------------------------------------------------------
# Hamiltonian-gradient estimator
# ---------------------------------------------------------------------------


def test_hamiltonian_gradient_deterministic_limit():
    game = random_game(1, 2, 2, seed=1)
    scheme = SamplingScheme.full_batch(1)
    vec = draw(scheme, numerics.make_rng(0))
    x = numerics.make_rng(2).standard_normal(game.dim)
    grad = stochastic_hamiltonian_gradient(game, x, vec, vec)
    expect = game.mean_jacobian().T @ game.full_value(x)
    assert np.allclose(grad, expect, rtol=1e-12, atol=1e-12)


def test_hamiltonian_gradient_swap_symmetric():
    game = random_game(4, 2, 2, seed=2)
    scheme = SamplingScheme.single_element(4)
    rng = numerics.make_rng(3)
    u, v = draw(scheme, rng), draw(scheme, rng)
    x = numerics.make_rng(4).standard_normal(game.dim)
    a = stochastic_hamiltonian_gradient(game, x, u, v)
    b = stochastic_hamiltonian_gradient(game, x, v, u)
    assert a.tobytes() == b.tobytes()


def test_hamiltonian_gradient_unbiased_over_product_support():
    rng = numerics.make_rng(5)
    for n in (2, 3, 5):
        game = random_game(n, 2, 1, seed=n)
        scheme = SamplingScheme.single_element(n)
        support = enumerate_support(scheme)
        for _ in range(20):
            x = rng.standard_normal(game.dim) * 2.0
            mean = np.zeros(game.dim)
            for pu, u in support:
                for pv, v in support:
                    mean += pu * pv * stochastic_hamiltonian_gradient(game, x, u, v)
            target = game.mean_jacobian().T @ game.full_value(x)
            assert np.linalg.norm(mean - target) <= 1e-12 * (
                1 + np.linalg.norm(target)
            )


def test_sampled_value_and_jacobian_full_batch():
    game = random_game(3, 2, 2, seed=6)
    vec = draw(SamplingScheme.full_batch(3), numerics.make_rng(0))
    x = np.ones(game.dim)
    assert np.allclose(sampled_value(game, x, vec), game.full_value(x), rtol=1e-12)
    assert np.allclose(sampled_jacobian(game, x, vec), game.mean_jacobian(), rtol=1e-12)


# ---------------------------------------------------------------------------
# single steps
# ---------------------------------------------------------------------------


def test_sgda_step_scalar_contraction():
    game = identity_game()
    vec = draw(SamplingScheme.full_batch(1), numerics.make_rng(0))
    out = solver_step("sgda", game, np.array([1.0, 0.0]), vec, None, 0.5, 0.0)
    assert np.allclose(out, [0.5, 0.0])


def test_sco_step_with_zero_gamma_equals_sgda_step():
    game = random_game(3, 2, 2, seed=7)
    vec = draw(SamplingScheme.single_element(3), numerics.make_rng(1))
    x = numerics.make_rng(2).standard_normal(game.dim)
    a = solver_step("sgda", game, x, vec, None, 0.07, 0.0)
    b = solver_step("sco", game, x, vec, None, 0.07, 0.0)
    assert a.tobytes() == b.tobytes()


def test_sco_step_with_zero_alpha_equals_shgd_step():
    game = random_game(3, 2, 2, seed=8)
    rng = numerics.make_rng(3)
    v, u = draw(SamplingScheme.single_element(3), rng), draw(
        SamplingScheme.single_element(3), rng
    )
    x = numerics.make_rng(4).standard_normal(game.dim)
    a = solver_step("shgd", game, x, v, u, 0.0, 0.02)
    b = solver_step("sco", game, x, v, u, 0.0, 0.02)
    assert a.tobytes() == b.tobytes()


def test_missing_second_draw():
    game = random_game(2, 1, 1, seed=9)
    vec = draw(SamplingScheme.single_element(2), numerics.make_rng(0))
    with pytest.raises(MissingSecondDrawError):
        solver_step("sco", game, np.zeros(game.dim), vec, None, 0.1, 0.1)


# ---------------------------------------------------------------------------
# full runs
# ---------------------------------------------------------------------------


def test_gda_geometric_decay_trace():
    game = identity_game()
    cfg = RunConfig(
        method="gda",
        operator=game,
        scheme=SamplingScheme.full_batch(1),
        schedule=ConstantSchedule(alpha=0.5),
        iterations=4,
        seed=0,
    )
    trace = run(cfg)
    assert trace.dist_sq[0] == pytest.approx(1.0, rel=1e-12)
    assert np.allclose(trace.dist_sq, [1.0, 0.25, 0.0625, 0.015625, 0.00390625], rtol=1e-10)


def test_run_is_deterministic_bitwise():
    game = random_game(4, 3, 3, seed=10)
    cfg = RunConfig(
        method="sco",
        operator=game,
        scheme=SamplingScheme.single_element(4),
        schedule=ConstantSchedule(alpha=0.01, gamma=0.005),
        iterations=200,
        seed=123,
    )
    t1, t2 = run(cfg), run(cfg)
    assert t1.dist_sq.tobytes() == t2.dist_sq.tobytes()
    assert t1.op_norm_sq.tobytes() == t2.op_norm_sq.tobytes()
    assert t1.final_x.tobytes() == t2.final_x.tobytes()


def test_sco_gamma_zero_couples_to_sgda():
    game = random_game(5, 2, 2, seed=11)
    scheme = SamplingScheme.single_element(5)
    for seed in range(3):
        sgda_cfg = RunConfig(
            method="sgda", operator=game, scheme=scheme,
            schedule=ConstantSchedule(alpha=0.02), iterations=500, seed=seed,
        )
        sco_cfg = RunConfig(
            method="sco", operator=game, scheme=scheme,
            schedule=ConstantSchedule(alpha=0.02, gamma=0.0), iterations=500, seed=seed,
        )
        assert run(sgda_cfg).dist_sq.tobytes() == run(sco_cfg).dist_sq.tobytes()


def test_sco_alpha_zero_couples_to_shgd():
    game = random_game(5, 2, 2, seed=12)
    scheme = SamplingScheme.single_element(5)
    for seed in range(3):
        shgd_cfg = RunConfig(
            method="shgd", operator=game, scheme=scheme,
            schedule=ConstantSchedule(alpha=0.0, gamma=0.003), iterations=500, seed=seed,
        )
        sco_cfg = RunConfig(
            method="sco", operator=game, scheme=scheme,
            schedule=ConstantSchedule(alpha=0.0, gamma=0.003), iterations=500, seed=seed,
        )
        assert run(shgd_cfg).dist_sq.tobytes() == run(sco_cfg).dist_sq.tobytes()


def test_gda_per_step_contraction_bound():
    # per-step squared-distance factor <= 1 - alpha mu at alpha = 1/(2 ell)
    rng = numerics.make_rng(13)
    for _ in range(10):
        game = random_game(int(rng.integers(2, 6)), 2, 2, seed=int(rng.integers(0, 10**6)))
        gc = C.game_constants(game)
        alpha = 1.0 / (2.0 * gc.ell)
        cfg = RunConfig(
            method="gda", operator=game, scheme=SamplingScheme.full_batch(game.n),
            schedule=ConstantSchedule(alpha=alpha), iterations=200, seed=1,
        )
        trace = run(cfg)
        factor = 1.0 - alpha * gc.mu
        for k in range(200):
            assert trace.dist_sq[k + 1] <= factor * trace.dist_sq[k] + 1e-12 * trace.dist_sq[0]


def test_co_per_step_contraction_bound():
    rng = numerics.make_rng(14)
    for _ in range(10):
        game = random_game(int(rng.integers(2, 6)), 2, 2, seed=int(rng.integers(0, 10**6)))
        gc = C.game_constants(game)
        ham = C.hamiltonian_constants(game, SamplingScheme.full_batch(game.n))
        alpha = 1.0 / (4.0 * gc.ell)
        gamma = 1.0 / (4.0 * ham.l_h)
        cfg = RunConfig(
            method="co", operator=game, scheme=SamplingScheme.full_batch(game.n),
            schedule=ConstantSchedule(alpha=alpha, gamma=gamma), iterations=200, seed=2,
        )
        trace = run(cfg)
        factor = 1.0 - gamma * ham.mu_h - alpha * gc.mu
        for k in range(200):
            assert trace.dist_sq[k + 1] <= factor * trace.dist_sq[k] + 1e-12 * trace.dist_sq[0]


def test_divergence_guard_truncates_and_flags():
    game = identity_game()
    cfg = RunConfig(
        method="gda", operator=game, scheme=SamplingScheme.full_batch(1),
        schedule=ConstantSchedule(alpha=25.0), iterations=50, seed=0,
    )
    trace = run(cfg)
    assert trace.diverged
    assert len(trace.dist_sq) < 51
    assert trace.dist_sq[-1] > 1e12 * trace.dist_sq[0]


def test_run_records_step_sizes_and_x0_override():
    game = identity_game()
    x0 = np.array([3.0, 4.0])
    sched = SgdaSwitchingSchedule(ell_xi=2.0, mu=1.0)
    cfg = RunConfig(
        method="sgda", operator=game, scheme=SamplingScheme.full_batch(1),
        schedule=sched, iterations=12, seed=0, x0=x0,
    )
    trace = run(cfg)
    assert trace.dist_sq[0] == pytest.approx(25.0, rel=1e-12)
    assert len(trace.alphas) == 12
    assert trace.alphas[0] == pytest.approx(0.25)
    assert trace.gammas.max() == 0.0
    assert trace.alphas[9] == pytest.approx((2 * 9 + 1) / (10**2 * 1.0), rel=1e-12)


def test_deterministic_methods_require_full_batch():
    game = random_game(3, 1, 1, seed=15)
    with pytest.raises(ConfigError):
        RunConfig(
            method="gda", operator=game, scheme=SamplingScheme.single_element(3),
            schedule=ConstantSchedule(alpha=0.1), iterations=5, seed=0,
        )


def test_trace_lengths_and_finiteness():
    game = random_game(3, 2, 2, seed=16)
    cfg = RunConfig(
        method="sgda", operator=game, scheme=SamplingScheme.minibatch(3, 2),
        schedule=ConstantSchedule(alpha=0.05), iterations=100, seed=3,
    )
    trace = run(cfg, record_iterates=True)
    assert len(trace.dist_sq) == 101
    assert len(trace.op_norm_sq) == 101
    assert trace.iterates.shape == (101, game.dim)
    assert np.all(np.isfinite(trace.dist_sq))
    assert np.all(np.isfinite(trace.op_norm_sq))
