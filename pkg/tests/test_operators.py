import numpy as np
import pytest

from stochvi import numerics
from stochvi.errors import (
    AsymmetryError,
    DimensionMismatchError,
    IndexOutOfRangeError,
    UnsupportedError,
)
from stochvi.operators import CosineOperator, FiniteSumOperator, QuadraticGame

FD_STEP = 1e-5


def scalar_game():
    return QuadraticGame(
        [[[2.0]]], [[[1.0]]], [[[3.0]]], [[1.0]], [[-1.0]]
    )


def random_game(n, d1, d2, seed, offsets=True):
    rng = numerics.make_rng(seed)
    a = np.stack([_spd(rng, d1) for _ in range(n)])
    c = np.stack([_spd(rng, d2) for _ in range(n)])
    b = rng.standard_normal((n, d1, d2))
    av = rng.standard_normal((n, d1)) if offsets else np.zeros((n, d1))
    cv = rng.standard_normal((n, d2)) if offsets else np.zeros((n, d2))
    return QuadraticGame(a, b, c, av, cv)


def _spd(rng, d):
    q = numerics.random_orthogonal(d, rng)
    return (q * rng.uniform(0.5, 3.0, d)) @ q.T


def finite_difference_jacobian(op, i, x):
    d = x.size
    jac = np.empty((d, d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = FD_STEP
        jac[:, j] = (op.component_value(i, x + e) - op.component_value(i, x - e)) / (
            2 * FD_STEP
        )
    return jac


def test_component_value_scalar_game():
    game = scalar_game()
    assert np.allclose(game.component_value(0, [1.0, 1.0]), [4.0, 1.0])


def test_component_value_matches_payoff_finite_differences():
    # component value is (d/dx1 g; -d/dx2 g) for the saddle payoff
    # g = x1 A x1 / 2 + x1 B x2 + a x1 - x2 C x2 / 2 - c x2.
    game = scalar_game()

    def payoff(x1, x2):
        return 0.5 * 2.0 * x1 * x1 + 1.0 * x1 * x2 + 1.0 * x1 - 0.5 * 3.0 * x2 * x2 - (-1.0) * x2

    x1, x2 = 1.0, 1.0
    g1 = (payoff(x1 + FD_STEP, x2) - payoff(x1 - FD_STEP, x2)) / (2 * FD_STEP)
    g2 = (payoff(x1, x2 + FD_STEP) - payoff(x1, x2 - FD_STEP)) / (2 * FD_STEP)
    assert np.allclose(game.component_value(0, [x1, x2]), [g1, -g2], atol=1e-9)


def test_full_value_vanishes_at_equilibrium():
    game = random_game(4, 3, 2, seed=5)
    x_star = game.equilibrium()
    r = np.linalg.norm(game.mean_offset())
    assert np.linalg.norm(game.full_value(x_star)) <= 1e-9 * max(r, 1.0)


def test_full_value_single_component():
    game = scalar_game()
    x = np.array([0.3, -0.7])
    assert np.array_equal(game.full_value(x), game.component_value(0, x))


def test_full_value_symmetric_cancellation():
    class PlusMinus(FiniteSumOperator):
        n = 2
        dim = 2

        def component_value(self, i, x):
            x = np.asarray(x, dtype=float)
            return x if i == 0 else -x

        def component_jacobian(self, i, x):
            sign = 1.0 if i == 0 else -1.0
            return sign * np.eye(2)

    op = PlusMinus()
    assert np.allclose(op.full_value([3.0, -4.0]), 0.0)


def test_component_jacobian_constant_blocks():
    game = scalar_game()
    expect = np.array([[2.0, 1.0], [-1.0, 3.0]])
    for x in ([0.0, 0.0], [5.0, -2.0]):
        assert np.array_equal(game.component_jacobian(0, x), expect)


def test_component_jacobian_matches_finite_differences():
    game = random_game(3, 2, 3, seed=11)
    rng = numerics.make_rng(0)
    for i in range(game.n):
        x = rng.standard_normal(game.dim)
        fd = finite_difference_jacobian(game, i, x)
        assert np.abs(fd - game.component_jacobian(i, x)).max() <= 1e-5


def test_cosine_jacobian_matches_finite_differences():
    op = CosineOperator(3, 1.0, 4.0)
    rng = numerics.make_rng(1)
    for _ in range(5):
        x = rng.standard_normal(3) * rng.uniform(0.1, 5.0)
        fd = finite_difference_jacobian(op, 0, x)
        assert np.abs(fd - op.component_jacobian(0, x)).max() <= 1e-5


def test_mean_jacobian_is_jacobian_of_full_value():
    game = random_game(4, 2, 2, seed=3)
    x = numerics.make_rng(2).standard_normal(game.dim)
    mean_jac = np.mean(
        [game.component_jacobian(i, x) for i in range(game.n)], axis=0
    )
    d = game.dim
    fd = np.empty((d, d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = FD_STEP
        fd[:, j] = (game.full_value(x + e) - game.full_value(x - e)) / (2 * FD_STEP)
    assert np.abs(fd - mean_jac).max() <= 1e-5
    assert np.allclose(mean_jac, game.mean_jacobian())


def test_equilibrium_scalar_game():
    game = scalar_game()
    x_star = game.equilibrium()
    assert np.allclose(x_star, [-4 / 7, 1 / 7])
    assert np.linalg.norm(game.full_value(x_star)) <= 1e-9 * (1 + np.linalg.norm(x_star))


def test_equilibrium_homogeneous_game_is_origin():
    game = random_game(3, 2, 2, seed=9, offsets=False)
    assert np.allclose(game.equilibrium(), 0.0)


def test_cosine_equilibrium_is_origin():
    op = CosineOperator(4, 1.0, 4.0)
    assert np.array_equal(op.equilibrium(), np.zeros(4))
    assert np.allclose(op.full_value(op.equilibrium()), 0.0)


def test_cosine_value_at_pi():
    op = CosineOperator(1, 1.0, 4.0)
    # pi * (1.5 cos(pi) + 2.5) = pi
    assert np.allclose(op.full_value([np.pi]), [np.pi], rtol=1e-12)


def test_index_and_dimension_errors():
    game = scalar_game()
    with pytest.raises(IndexOutOfRangeError):
        game.component_value(1, [0.0, 0.0])
    with pytest.raises(DimensionMismatchError):
        game.component_value(0, [0.0, 0.0, 0.0])
    with pytest.raises(AsymmetryError):
        QuadraticGame([[[0.0, 1.0], [0.5, 0.0]]], [[[1.0], [1.0]]],
                      [[[1.0]]], [[0.0, 0.0]], [[0.0]])


def test_operator_without_equilibrium_raises():
    class Anonymous(FiniteSumOperator):
        n = 1
        dim = 1

        def component_value(self, i, x):
            return np.asarray(x, dtype=float) ** 3

        def component_jacobian(self, i, x):
            return np.asarray([[3.0 * float(x[0]) ** 2]])

    op = Anonymous()
    assert not op.has_equilibrium
    with pytest.raises(UnsupportedError):
        op.equilibrium()


def test_quadratic_monotonicity_gap_equals_symmetric_part():
    # <value(x) - value(y), x - y> equals (x-y)^T blkdiag(A, C) (x-y).
    game = random_game(5, 3, 2, seed=21)
    sym = np.zeros((game.dim, game.dim))
    sym[: game.d1, : game.d1] = game.A.mean(axis=0)
    sym[game.d1 :, game.d1 :] = game.C.mean(axis=0)
    lam_min = numerics.symmetric_eigenvalues(sym)[0]
    rng = numerics.make_rng(4)
    for _ in range(1000):
        x = rng.standard_normal(game.dim)
        y = rng.standard_normal(game.dim)
        gap = (game.full_value(x) - game.full_value(y)) @ (x - y)
        quad = (x - y) @ sym @ (x - y)
        assert abs(gap - quad) <= 1e-9 * (1 + abs(quad))
        assert gap >= lam_min * (x - y) @ (x - y) - 1e-9


def test_cosine_quasi_strong_monotonicity_grid():
    op = CosineOperator(2, 1.0, 4.0)
    rng = numerics.make_rng(6)
    pts = rng.standard_normal((10**4, 2))
    pts *= (rng.uniform(0.0, 100.0, 10**4) / np.linalg.norm(pts, axis=1))[:, None]
    for x in pts:
        val = op.full_value(x)
        assert val @ x >= 1.0 * x @ x - 1e-9 * (1 + x @ x)


def test_cosine_cocoercivity_around_equilibrium_grid():
    op = CosineOperator(2, 1.0, 4.0)
    rng = numerics.make_rng(7)
    pts = rng.standard_normal((10**4, 2))
    pts *= (rng.uniform(0.0, 100.0, 10**4) / np.linalg.norm(pts, axis=1))[:, None]
    for x in pts:
        val = op.full_value(x)
        assert val @ val <= 4.0 * (val @ x) + 1e-9 * (1 + val @ val)


def test_cosine_monotonicity_fails_at_known_pair():
    # One full period out, the cosine term reverses the slope:
    # <value(x) - value(y), x - y> = (pi^2/8) (L + mu - 4k(L - mu)) at
    # x = 2 pi k + pi/2, y = 2 pi k; negative for k = 1, mu = 1, L = 4.
    op = CosineOperator(1, 1.0, 4.0)
    x = np.array([2 * np.pi + np.pi / 2])
    y = np.array([2 * np.pi])
    gap = (op.full_value(x) - op.full_value(y)) @ (x - y)
    expect = (np.pi**2 / 8) * (4 + 1 - 4 * (4 - 1))
    assert abs(gap - expect) <= 1e-9
    assert gap < 0
