"""Equilibrium computation for the four learner-environment regimes.

Regimes: stationary environment, Stackelberg with either player leading, and
Nash. The Nash path offers both the stochastic projected-gradient scheme with
weighted iterate averaging (the online estimator used by model selection) and
a deterministic constant-step solver for certified equilibria, plus
brute-force grid oracles for small instances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import (
    ActionSet,
    Box,
    ConvergenceError,
    GameSpec,
    JointAction,
    ModelClassLadder,
    Product,
    gradient_operator,
    noisy_gradient_operator,
)

REGIMES = ("stationary", "stackelberg_leader", "stackelberg_follower", "nash")


@dataclass(eq=False)
class EquilibriumReport:
    regime: str
    joint: JointAction
    loss_learner: float
    loss_env: float
    nash_residual: float
    iterations: int
    seed: Optional[int] = None
    certified: bool = True


@dataclass(eq=False)
class PsgdTrace:
    """Output of the averaged stochastic projected-gradient run."""

    averaged_point: JointAction
    final_point: JointAction
    horizon: int
    stepsize_schedule: str = "eta_t = 2 / (mu * (t + 1))"


# ---------------------------------------------------------------------------
# Single-player projected descent
# ---------------------------------------------------------------------------


def _projected_descent(
    grad: Callable[[np.ndarray], np.ndarray],
    feasible: ActionSet,
    x0: np.ndarray,
    step: float,
    tol: float,
    max_iters: int,
) -> tuple[np.ndarray, int]:
    """Projected gradient descent to unit-step natural residual <= tol."""
    x = feasible.project(np.asarray(x0, dtype=float))
    for it in range(1, max_iters + 1):
        g = grad(x)
        residual = float(np.linalg.norm(x - feasible.project(x - g)))
        if residual <= tol:
            return x, it
        x = feasible.project(x - step * g)
    raise ConvergenceError(f"projected descent: residual > {tol} after {max_iters} iterations")


def stationary_optimum(
    game: GameSpec,
    model_class: ActionSet,
    fixed_env: np.ndarray,
    tol: float = 1e-8,
    max_iters: int = 200_000,
) -> EquilibriumReport:
    """Minimize the learner loss against a single fixed environment action."""
    e = np.asarray(fixed_env, dtype=float)
    theta0 = model_class.project(np.zeros(game.dim_learner))
    theta, iters = _projected_descent(
        lambda t: game.grad_l(t, e), model_class, theta0, 1.0 / game.lipschitz, tol, max_iters
    )
    residual = float(np.linalg.norm(theta - model_class.project(theta - game.grad_l(theta, e))))
    return EquilibriumReport(
        regime="stationary",
        joint=JointAction(theta, e),
        loss_learner=float(game.loss_learner(theta, e)),
        loss_env=float(game.loss_env(theta, e)),
        nash_residual=residual,
        iterations=iters,
    )


def best_response(
    game: GameSpec,
    player: str,
    opponent_action: np.ndarray,
    own_set: ActionSet,
    tol: float = 1e-9,
    max_iters: int = 200_000,
) -> np.ndarray:
    """Loss-minimizing action of one player against a fixed opponent action."""
    opp = np.asarray(opponent_action, dtype=float)
    if player == "learner":
        grad = lambda t: game.grad_l(t, opp)
    elif player == "env":
        grad = lambda e: game.grad_e(opp, e)
    else:
        raise ValueError(f"unknown player {player!r}")
    x0 = own_set.project(np.zeros(own_set.dimension))
    x, _ = _projected_descent(grad, own_set, x0, 1.0 / game.lipschitz, tol, max_iters)
    return x


# ---------------------------------------------------------------------------
# Grid search
# ---------------------------------------------------------------------------


def grid_points(feasible: ActionSet, resolution: int, box: Optional[Box] = None) -> np.ndarray:
    """Lexicographically ordered mesh over the bounding box, feasibility-filtered."""
    box = box if box is not None else feasible.bounding_box()
    axes = [np.linspace(lo, hi, resolution) for lo, hi in zip(box.lower, box.upper)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, box.dimension)
    keep = [p for p in mesh if feasible.contains(p, tol=1e-9)]
    return np.array(keep) if keep else np.empty((0, box.dimension))


def _grid_minimize(
    objective: Callable[[np.ndarray], float],
    feasible: ActionSet,
    resolution: int,
    zoom_rounds: int = 2,
) -> tuple[np.ndarray, float, int]:
    """Grid search refined by zoom rounds; lexicographically first tie-break."""
    outer = feasible.bounding_box()
    box = outer
    best_point, best_value = None, math.inf
    evals = 0
    for _ in range(zoom_rounds + 1):
        pts = grid_points(feasible, resolution, box)
        if pts.shape[0] == 0:
            break
        for p in pts:
            v = objective(p)
            evals += 1
            if v < best_value - 1e-15:
                best_value, best_point = v, p
        spacing = (box.upper - box.lower) / max(resolution - 1, 1)
        lo = np.maximum(outer.lower, best_point - spacing)
        hi = np.minimum(outer.upper, best_point + spacing)
        box = Box(lo, hi)
    if best_point is None:
        raise ValueError("empty grid: feasible set has no grid points")
    return best_point, best_value, evals


def _pattern_search(
    objective: Callable[[np.ndarray], float],
    feasible: ActionSet,
    x0: np.ndarray,
    initial_step: float,
    tol: float = 1e-8,
    max_iters: int = 10_000,
) -> tuple[np.ndarray, float, int]:
    """Compass search with shrinking steps; local, used beyond grid dimensions."""
    x = feasible.project(x0)
    fx = objective(x)
    h = initial_step
    evals = 1
    d = x.shape[0]
    for _ in range(max_iters):
        improved = False
        for j in range(d):
            for sign in (+1.0, -1.0):
                cand = x.copy()
                cand[j] += sign * h
                cand = feasible.project(cand)
                val = objective(cand)
                evals += 1
                if val < fx - 1e-15:
                    x, fx = cand, val
                    improved = True
        if not improved:
            h *= 0.5
            if h < tol:
                break
    return x, fx, evals


def stackelberg_leader(
    game: GameSpec,
    leader: str,
    leader_set: ActionSet,
    follower_set: ActionSet,
    grid_resolution: int = 101,
    br_tol: float = 1e-9,
) -> EquilibriumReport:
    """Stackelberg equilibrium: the leader commits, the follower best-responds.

    Leader sets of dimension <= 2 are solved by grid search with two zoom
    rounds (certified to grid resolution); higher dimensions fall back to a
    local pattern search and the report is flagged non-certified.
    """
    if leader == "learner":
        follower = "env"
        objective = lambda a: float(
            game.loss_learner(a, best_response(game, follower, a, follower_set, br_tol))
        )
    elif leader == "env":
        follower = "learner"
        objective = lambda a: float(
            game.loss_env(best_response(game, follower, a, follower_set, br_tol), a)
        )
    else:
        raise ValueError(f"unknown leader {leader!r}")

    certified = leader_set.dimension <= 2
    if certified:
        action, _, evals = _grid_minimize(objective, leader_set, grid_resolution)
    else:
        box = leader_set.bounding_box()
        span = float(np.max(box.upper - box.lower))
        x0 = leader_set.project((box.lower + box.upper) / 2.0)
        action, _, evals = _pattern_search(objective, leader_set, x0, span / 4.0)

    follower_action = best_response(game, follower, action, follower_set, br_tol)
    if leader == "learner":
        theta, env = action, follower_action
        learner_set, env_set = leader_set, follower_set
        regime = "stackelberg_leader"
    else:
        theta, env = follower_action, action
        learner_set, env_set = follower_set, leader_set
        regime = "stackelberg_follower"
    joint = JointAction(theta, env)
    return EquilibriumReport(
        regime=regime,
        joint=joint,
        loss_learner=float(game.loss_learner(theta, env)),
        loss_env=float(game.loss_env(theta, env)),
        nash_residual=nash_residual(game, joint, learner_set, env_set),
        iterations=evals,
        certified=certified,
    )


# ---------------------------------------------------------------------------
# Nash solvers
# ---------------------------------------------------------------------------


def psgd_nash(
    game: GameSpec,
    learner_set: ActionSet,
    env_set: ActionSet,
    x0: JointAction,
    horizon: int,
    rng: np.random.Generator,
) -> PsgdTrace:
    """Projected stochastic gradient steps with weighted iterate averaging.

    Iterates x_{t+1} = P(x_t - eta_t * Fhat(x_t)) with eta_t = 2/(mu (t+1));
    the returned average weights iterate t by t / (T(T+1)/2).
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    joint_set = Product(learner_set, env_set)
    x = joint_set.project(x0.concat())
    acc = np.zeros_like(x)
    mu = game.mu
    dl = game.dim_learner
    for t in range(1, horizon + 1):
        acc += t * x
        fhat = noisy_gradient_operator(game, JointAction.from_concat(x, dl), rng)
        eta = 2.0 / (mu * (t + 1))
        x = joint_set.project(x - eta * fhat)
    averaged = acc * (2.0 / (horizon * (horizon + 1)))
    return PsgdTrace(
        averaged_point=JointAction.from_concat(averaged, dl),
        final_point=JointAction.from_concat(x, dl),
        horizon=horizon,
    )


def nash_residual(
    game: GameSpec, x: JointAction, learner_set: ActionSet, env_set: ActionSet
) -> float:
    """Natural residual |x - P(x - F(x))| of the stacked projected-gradient
    step (both players' own-action blocks); zero exactly at a Nash point of
    the convex game."""
    r_l = x.theta - learner_set.project(x.theta - game.grad_l(x.theta, x.env))
    r_e = x.env - env_set.project(x.env - game.grad_e(x.theta, x.env))
    return float(np.linalg.norm(np.concatenate([r_l, r_e])))


def solve_nash(
    game: GameSpec,
    learner_set: ActionSet,
    env_set: ActionSet,
    x0: Optional[JointAction] = None,
    tol: float = 1e-10,
    max_iters: int = 500_000,
) -> tuple[JointAction, int]:
    """Deterministic Nash solve: constant-step projected gradient on F.

    Step mu/L^2 contracts the distance to the unique Nash point of a strongly
    monotone game; stops at unit-step natural residual <= tol.
    """
    joint_set = Product(learner_set, env_set)
    if x0 is None:
        x = joint_set.project(np.zeros(joint_set.dimension))
    else:
        x = joint_set.project(x0.concat())
    eta = game.mu / (game.lipschitz**2)
    dl = game.dim_learner
    for it in range(1, max_iters + 1):
        f = gradient_operator(game, JointAction.from_concat(x, dl))
        if float(np.linalg.norm(x - joint_set.project(x - f))) <= tol:
            return JointAction.from_concat(x, dl), it
        x = joint_set.project(x - eta * f)
    raise ConvergenceError(f"Nash solve: residual > {tol} after {max_iters} iterations")


def nash_report(
    game: GameSpec,
    learner_set: ActionSet,
    env_set: ActionSet,
    x0: Optional[JointAction] = None,
    tol: float = 1e-10,
) -> EquilibriumReport:
    x, iters = solve_nash(game, learner_set, env_set, x0, tol)
    return EquilibriumReport(
        regime="nash",
        joint=x,
        loss_learner=float(game.loss_learner(x.theta, x.env)),
        loss_env=float(game.loss_env(x.theta, x.env)),
        nash_residual=nash_residual(game, x, learner_set, env_set),
        iterations=iters,
    )


def best_response_dynamics(
    game: GameSpec,
    learner_set: ActionSet,
    env_set: ActionSet,
    x0: JointAction,
    tol: float = 1e-10,
    max_rounds: int = 1_000,
) -> tuple[JointAction, int]:
    """Alternating exact best responses; converges when the BR map contracts."""
    theta, env = learner_set.project(x0.theta), env_set.project(x0.env)
    for rounds in range(1, max_rounds + 1):
        theta_new = best_response(game, "learner", env, learner_set, tol=min(tol, 1e-10))
        env_new = best_response(game, "env", theta_new, env_set, tol=min(tol, 1e-10))
        move = float(np.linalg.norm(theta_new - theta) + np.linalg.norm(env_new - env))
        theta, env = theta_new, env_new
        if move <= tol:
            return JointAction(theta, env), rounds
    raise ConvergenceError("best-response dynamics did not converge (map may not contract)")


# ---------------------------------------------------------------------------
# Brute-force oracles
# ---------------------------------------------------------------------------


def pareto_improvement_search(
    game: GameSpec,
    x: JointAction,
    learner_set: ActionSet,
    env_set: ActionSet,
    grid_resolution: int = 201,
    max_points: int = 20_000_000,
) -> Optional[JointAction]:
    """Exhaustive grid witness that x is not Pareto optimal, if one exists.

    Returns a grid point strictly improving the learner loss without raising
    the environment loss, preferring the largest learner improvement; None if
    the grid contains no such point.
    """
    joint_dim = learner_set.dimension + env_set.dimension
    if joint_dim > 4:
        raise ValueError("exhaustive grid limited to joint dimension <= 4")
    theta_pts = grid_points(learner_set, grid_resolution)
    env_pts = grid_points(env_set, grid_resolution)
    if theta_pts.shape[0] * env_pts.shape[0] > max_points:
        raise ValueError("grid too large; lower the resolution")
    f_l_ref = float(game.loss_learner(x.theta, x.env))
    f_e_ref = float(game.loss_env(x.theta, x.env))
    best: Optional[JointAction] = None
    best_val = f_l_ref - 1e-9
    for t in theta_pts:
        for e in env_pts:
            if float(game.loss_env(t, e)) > f_e_ref + 1e-12:
                continue
            v = float(game.loss_learner(t, e))
            if v < best_val - 1e-15:
                best_val = v
                best = JointAction(t, e)
    return best


def grid_nash(
    game: GameSpec,
    learner_set: ActionSet,
    env_set: ActionSet,
    resolution: int = 101,
) -> tuple[JointAction, float]:
    """Exhaustive-grid Nash oracle via the mutual best-response check.

    Returns the grid cell minimizing the sum of both players' best-response
    regrets on the grid, together with that regret (zero iff the cell is an
    exact mutual best response among grid points).
    """
    theta_pts = grid_points(learner_set, resolution)
    env_pts = grid_points(env_set, resolution)
    losses_l = np.array([[game.loss_learner(t, e) for e in env_pts] for t in theta_pts])
    losses_e = np.array([[game.loss_env(t, e) for e in env_pts] for t in theta_pts])
    regret_l = losses_l - losses_l.min(axis=0, keepdims=True)
    regret_e = losses_e - losses_e.min(axis=1, keepdims=True)
    total = regret_l + regret_e
    i, j = np.unravel_index(int(np.argmin(total)), total.shape)
    return JointAction(theta_pts[i], env_pts[j]), float(total[i, j])


# ---------------------------------------------------------------------------
# Scaling sweeps over a ladder
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class RegimeInputs:
    """Per-class inputs produced by a scaling-curve game factory."""

    game: GameSpec
    env_set: Optional[ActionSet] = None
    fixed_env: Optional[np.ndarray] = None


def scaling_curve(
    game_factory: Callable[[ActionSet], RegimeInputs],
    ladder: ModelClassLadder,
    regime: str,
    grid_resolution: int = 101,
    nash_tol: float = 1e-9,
) -> list[tuple[int, EquilibriumReport]]:
    """Equilibrium per ladder class under one interaction regime.

    The learner-loss sequence is non-increasing in class index for the
    stationary and learner-leading Stackelberg regimes; the Nash regime can
    break monotonicity, which is the phenomenon under study.
    """
    if regime not in REGIMES:
        raise ValueError(f"unknown regime {regime!r}")
    out = []
    for k, cls in enumerate(ladder):
        inputs = game_factory(cls)
        game = inputs.game
        if regime == "stationary":
            if inputs.fixed_env is None:
                raise ValueError("stationary regime needs fixed_env")
            report = stationary_optimum(game, cls, inputs.fixed_env)
        elif regime == "stackelberg_leader":
            report = stackelberg_leader(game, "learner", cls, inputs.env_set, grid_resolution)
        elif regime == "stackelberg_follower":
            report = stackelberg_leader(game, "env", inputs.env_set, cls, grid_resolution)
        else:
            report = nash_report(game, cls, inputs.env_set, tol=nash_tol)
        out.append((k, report))
    return out
