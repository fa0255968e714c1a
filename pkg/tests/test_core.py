"""Action sets, projections, gradient oracles, and regularity audits."""

import math

import numpy as np
import pytest

from gamescale.core import (
    Box,
    ConvergenceError,
    GameSpec,
    Halfspace,
    Intersection,
    JointAction,
    ModelClassLadder,
    Product,
    UnboundedSetError,
    box_1d,
    central_difference,
    check_gradients,
    gradient_operator,
    monotonicity_audit,
    noisy_gradient_operator,
)


def coupling_game(c: float, mu: float = 1.0, lipschitz: float = 2.0, sigma: float = 0.0) -> GameSpec:
    """f_l = theta^2/2 + c theta e, f_e = e^2/2 - c theta e (skew coupling)."""
    return GameSpec(
        dim_learner=1,
        dim_env=1,
        loss_learner=lambda t, e: 0.5 * t[0] ** 2 + c * t[0] * e[0],
        loss_env=lambda t, e: 0.5 * e[0] ** 2 - c * t[0] * e[0],
        grad_learner=lambda t, e: np.array([t[0] + c * e[0]]),
        grad_env=lambda t, e: np.array([e[0] - c * t[0]]),
        mu=mu,
        lipschitz=lipschitz,
        noise_bound=sigma,
    )


# ---------------------------------------------------------------------------
# Projections
# ---------------------------------------------------------------------------


def test_box_projection_clamps():
    box = Box(np.zeros(2), np.ones(2))
    np.testing.assert_allclose(box.project(np.array([2.0, 0.5])), [1.0, 0.5])


def test_halfspace_projection_closed_form():
    hs = Halfspace(np.array([1.0, 0.0]), 0.0)
    np.testing.assert_allclose(hs.project(np.array([1.0, 1.0])), [0.0, 1.0])
    # interior points are untouched
    np.testing.assert_allclose(hs.project(np.array([-0.5, 2.0])), [-0.5, 2.0])


def test_intersection_projection_matches_grid_oracle():
    region = Intersection([Box(np.zeros(2), np.ones(2)), Halfspace(np.ones(2), 1.0)])
    got = region.project(np.array([1.0, 1.0]))
    np.testing.assert_allclose(got, [0.5, 0.5], atol=1e-10)
    # brute-force oracle: nearest feasible grid point
    axis = np.linspace(0.0, 1.0, 401)
    xx, yy = np.meshgrid(axis, axis, indexing="ij")
    feasible = xx + yy <= 1.0 + 1e-12
    d2 = (xx - 1.0) ** 2 + (yy - 1.0) ** 2
    d2[~feasible] = np.inf
    i, j = np.unravel_index(int(np.argmin(d2)), d2.shape)
    assert abs(axis[i] - got[0]) <= 1.0 / 400 + 1e-12
    assert abs(axis[j] - got[1]) <= 1.0 / 400 + 1e-12


def test_projection_idempotent():
    rng = np.random.default_rng(0)
    region = Intersection(
        [Box(-np.ones(3), np.ones(3)), Halfspace(np.array([1.0, 1.0, 0.0]), 0.5)]
    )
    for _ in range(50):
        x = rng.normal(size=3) * 3.0
        p = region.project(x)
        np.testing.assert_allclose(region.project(p), p, atol=1e-12)


def test_projection_optimality_boxes():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        dim = int(rng.integers(1, 4))
        lower = rng.normal(size=dim)
        upper = lower + rng.uniform(0.1, 2.0, size=dim)
        box = Box(lower, upper)
        x = rng.normal(size=dim) * 4.0
        p = box.project(x)
        inside = rng.uniform(lower, upper, size=(100, dim))
        dist_p = np.linalg.norm(x - p)
        dists = np.linalg.norm(x - inside, axis=1)
        assert np.all(dist_p <= dists + 1e-12)


def test_empty_intersection_raises_after_cap():
    empty = Intersection(
        [Halfspace(np.array([1.0]), -1.0), Halfspace(np.array([-1.0]), -1.0)]
    )
    with pytest.raises(ConvergenceError):
        empty.project(np.array([0.0]))


def test_invalid_sets_rejected():
    with pytest.raises(ValueError):
        Box(np.array([1.0]), np.array([0.0]))
    with pytest.raises(ValueError):
        Halfspace(np.zeros(2), 1.0)
    with pytest.raises(ValueError):
        Intersection([box_1d(0, 1), Box(np.zeros(2), np.ones(2))])
    with pytest.raises(UnboundedSetError):
        Halfspace(np.ones(2), 0.0).bounding_box()


def test_product_projects_componentwise():
    joint = Product(box_1d(0.0, 1.0), box_1d(-1.0, 0.0))
    np.testing.assert_allclose(joint.project(np.array([2.0, 0.5])), [1.0, 0.0])


# ---------------------------------------------------------------------------
# Gradient operator
# ---------------------------------------------------------------------------


def test_gradient_operator_decoupled():
    game = coupling_game(0.0, lipschitz=1.0)
    out = gradient_operator(game, JointAction(np.array([3.0]), np.array([-2.0])))
    np.testing.assert_allclose(out, [3.0, -2.0])


def test_gradient_operator_coupled_by_hand():
    game = coupling_game(1.0, lipschitz=2.0)
    out = gradient_operator(game, JointAction(np.array([1.0]), np.array([1.0])))
    np.testing.assert_allclose(out, [2.0, 0.0])


def test_gradient_operator_rejects_nonfinite():
    game = GameSpec(
        dim_learner=1,
        dim_env=1,
        loss_learner=lambda t, e: float("nan"),
        loss_env=lambda t, e: 0.0,
        grad_learner=lambda t, e: np.array([float("nan")]),
        grad_env=lambda t, e: np.array([0.0]),
        mu=1.0,
        lipschitz=1.0,
    )
    with pytest.raises(FloatingPointError):
        gradient_operator(game, JointAction(np.zeros(1), np.zeros(1)))


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(2)
    for trial in range(5):
        a, b, c = rng.uniform(0.5, 2.0, size=3)
        game = GameSpec(
            dim_learner=2,
            dim_env=2,
            loss_learner=lambda t, e, a=a, c=c: a * float(t @ t) + c * float(t @ e),
            loss_env=lambda t, e, b=b, c=c: b * float(e @ e) - c * float(t @ e),
            grad_learner=lambda t, e, a=a, c=c: 2 * a * t + c * e,
            grad_env=lambda t, e, b=b, c=c: 2 * b * e - c * t,
            mu=0.5,
            lipschitz=8.0,
        )
        region = Product(Box(-np.ones(2), np.ones(2)), Box(-np.ones(2), np.ones(2)))
        assert check_gradients(game, region, rng, samples=20, step=1e-5, rel_tol=1e-5)


def test_omitted_gradients_fall_back_to_finite_differences():
    game = GameSpec(
        dim_learner=1,
        dim_env=1,
        loss_learner=lambda t, e: 0.5 * t[0] ** 2 + t[0] * e[0],
        loss_env=lambda t, e: 0.5 * e[0] ** 2,
        mu=1.0,
        lipschitz=2.0,
    )
    out = gradient_operator(game, JointAction(np.array([1.0]), np.array([1.0])))
    np.testing.assert_allclose(out, [2.0, 1.0], atol=1e-7)


def test_central_difference_on_quadratic():
    f = lambda x: float(x @ x)
    np.testing.assert_allclose(
        central_difference(f, np.array([1.0, -2.0])), [2.0, -4.0], atol=1e-7
    )


def test_game_spec_validation():
    mk = lambda **kw: GameSpec(
        dim_learner=1,
        dim_env=1,
        loss_learner=lambda t, e: 0.0,
        loss_env=lambda t, e: 0.0,
        **kw,
    )
    with pytest.raises(ValueError):
        mk(mu=2.0, lipschitz=1.0)
    with pytest.raises(ValueError):
        mk(mu=-1.0, lipschitz=1.0)
    with pytest.raises(ValueError):
        mk(mu=0.5, lipschitz=1.0, noise_bound=-0.1)


# ---------------------------------------------------------------------------
# Noisy oracle
# ---------------------------------------------------------------------------


def test_noisy_gradient_zero_sigma_is_exact():
    game = coupling_game(0.0, lipschitz=1.0, sigma=0.0)
    x = JointAction(np.array([0.3]), np.array([-0.7]))
    rng = np.random.default_rng(3)
    np.testing.assert_array_equal(
        noisy_gradient_operator(game, x, rng), gradient_operator(game, x)
    )


def test_noisy_gradient_mean_and_bound():
    sigma = 0.5
    game = coupling_game(0.0, lipschitz=1.0, sigma=sigma)
    x = JointAction(np.array([0.3]), np.array([-0.7]))
    base = gradient_operator(game, x)
    rng = np.random.default_rng(4)
    n = 100_000
    draws = np.array([noisy_gradient_operator(game, x, rng) for _ in range(n)])
    noise = draws - base
    norms = np.linalg.norm(noise, axis=1)
    assert np.all(norms <= 1.0 + 1e-12)
    assert float(np.mean(norms**2)) <= sigma**2 + 3e-3
    # componentwise mean within 3 sigma / sqrt(n)
    assert np.all(np.abs(noise.mean(axis=0)) <= 3.0 * sigma / math.sqrt(n))


def test_noisy_gradient_deterministic_given_seed():
    game = coupling_game(0.0, lipschitz=1.0, sigma=0.3)
    x = JointAction(np.array([0.1]), np.array([0.2]))
    a = noisy_gradient_operator(game, x, np.random.default_rng(42))
    b = noisy_gradient_operator(game, x, np.random.default_rng(42))
    np.testing.assert_array_equal(a, b)


# ---------------------------------------------------------------------------
# Monotonicity audit
# ---------------------------------------------------------------------------

JOINT_BOX = Product(box_1d(-2.0, 2.0), box_1d(-2.0, 2.0))


def test_audit_decoupled_quadratics():
    report = monotonicity_audit(coupling_game(0.0, lipschitz=1.0), JOINT_BOX, 200, np.random.default_rng(5))
    assert report.passed
    assert report.min_modulus >= 1.0 - 1e-7


def test_audit_skew_coupling_cancels():
    report = monotonicity_audit(coupling_game(1.0), JOINT_BOX, 200, np.random.default_rng(6))
    assert report.passed
    assert report.min_modulus >= 1.0 - 1e-7


def test_audit_flags_concave_player():
    game = GameSpec(
        dim_learner=1,
        dim_env=1,
        loss_learner=lambda t, e: -0.5 * t[0] ** 2,
        loss_env=lambda t, e: 0.5 * e[0] ** 2,
        grad_learner=lambda t, e: np.array([-t[0]]),
        grad_env=lambda t, e: np.array([e[0]]),
        mu=0.5,
        lipschitz=1.0,
    )
    report = monotonicity_audit(game, JOINT_BOX, 200, np.random.default_rng(7))
    assert not report.passed
    assert report.violating_pair is not None


# ---------------------------------------------------------------------------
# Ladders
# ---------------------------------------------------------------------------


def test_ladder_nested_boxes_pass():
    ladder = ModelClassLadder(
        [Box(-r * np.ones(2), r * np.ones(2)) for r in (0.25, 0.5, 1.0)]
    )
    assert ladder.check_nested(np.random.default_rng(8))


def test_ladder_non_nested_fails():
    ladder = ModelClassLadder([Box(np.array([0.0, 0.0]), np.array([2.0, 2.0])),
                               Box(np.array([1.0, 1.0]), np.array([3.0, 3.0]))])
    assert not ladder.check_nested(np.random.default_rng(9))
