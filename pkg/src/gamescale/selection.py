"""Successive elimination over candidate model classes.

Treats each candidate action set as a bandit arm. Every epoch doubles the
projected-stochastic-gradient horizon, re-estimates each surviving arm's
equilibrium learner loss from a fresh run, and eliminates arms whose
confidence interval is strictly dominated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .core import ActionSet, GameSpec, JointAction, ModelClassLadder
from .equilibrium import psgd_nash

ArmFactory = Callable[[ActionSet], tuple[GameSpec, ActionSet, JointAction]]


def confidence_radius(L: float, mu: float, T: int, delta: float, scale: float = 1.0) -> float:
    """Anytime radius scale * (L^2 log(1/delta) + L^3) / (mu^2 T)."""
    if T < 1:
        raise ValueError("T must be >= 1")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if L <= 0 or mu <= 0 or scale <= 0:
        raise ValueError("L, mu, and scale must be positive")
    return scale * (L * L * math.log(1.0 / delta) + L**3) / (mu * mu * T)


def suboptimality_gaps(losses: Sequence[float]) -> tuple[list[float], Optional[float]]:
    """Per-arm gaps to the best loss and the smallest nonzero gap.

    Returns (gaps, None) when all losses coincide, in which case the minimum
    gap is undefined and no separation-based bound applies.
    """
    if len(losses) == 0:
        raise ValueError("need at least one loss")
    best = min(losses)
    gaps = [x - best for x in losses]
    nonzero = [g for g in gaps if g > 0.0]
    return gaps, (min(nonzero) if nonzero else None)


@dataclass(eq=False)
class ArmState:
    class_index: int
    action_set: ActionSet
    last_estimate: float = math.nan
    pulls: int = 0
    active: bool = True


@dataclass
class EpochRecord:
    """One arm's evaluation inside one epoch (CSV row of the elimination log)."""

    epoch: int
    horizon: int
    arm: int
    estimate: float
    radius: float
    active_after: bool


@dataclass(eq=False)
class SelectionReport:
    winner: Optional[int]
    survivors: list[int]
    inconclusive: bool
    epochs: int
    total_steps: int
    elimination_log: list[tuple[int, int, float]]
    evaluations: list[EpochRecord]
    delta: float
    arms: list[ArmState] = field(default_factory=list)


def successive_elimination(
    arms: Sequence[ActionSet] | ModelClassLadder,
    game_factory: ArmFactory,
    delta: float,
    alpha: float,
    rng: np.random.Generator,
    scale: float = 1.0,
    maximize: bool = False,
    max_total_steps: int = 1_000_000,
) -> SelectionReport:
    """Identify the arm with the best equilibrium learner loss.

    Epoch tau uses horizon T = ceil(alpha * 2^tau) and per-test failure budget
    delta' = delta / (2 n T^2). Arm i is eliminated once some arm j satisfies
    f_j + U(T, delta') < f_i - U(T, delta') on the current epoch's fresh
    estimates (losses; set maximize=True to compare payoffs instead).

    Stops when one arm survives, or returns all survivors flagged
    inconclusive when the next epoch would exceed the step budget.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    sets = list(arms)
    n = len(sets)
    states = [ArmState(i, s) for i, s in enumerate(sets)]
    inputs = [game_factory(s) for s in sets]
    lipschitz = max(game.lipschitz for game, _, _ in inputs)
    mu = min(game.mu for game, _, _ in inputs)

    total_steps = 0
    epochs = 0
    eliminations: list[tuple[int, int, float]] = []
    records: list[EpochRecord] = []
    inconclusive = False
    tau = 1
    while sum(s.active for s in states) > 1:
        active = [s for s in states if s.active]
        horizon = int(math.ceil(alpha * 2**tau))
        if total_steps + len(active) * horizon > max_total_steps:
            inconclusive = True
            break
        delta_prime = delta / (2.0 * n * horizon * horizon)
        radius = confidence_radius(lipschitz, mu, horizon, delta_prime, scale)
        streams = rng.spawn(len(active))
        for state, stream in zip(active, streams):
            game, env_set, x0 = inputs[state.class_index]
            trace = psgd_nash(game, state.action_set, env_set, x0, horizon, stream)
            avg = trace.averaged_point
            state.last_estimate = float(game.loss_learner(avg.theta, avg.env))
            state.pulls += horizon
        total_steps += len(active) * horizon
        epochs = tau

        sign = -1.0 if maximize else 1.0
        scores = {s.class_index: sign * s.last_estimate for s in active}
        best_ucb = min(scores.values()) + radius
        for state in active:
            lcb = scores[state.class_index] - radius
            if lcb > best_ucb:
                state.active = False
                eliminations.append((tau, state.class_index, lcb - best_ucb))
        for state in active:
            records.append(
                EpochRecord(tau, horizon, state.class_index, state.last_estimate, radius, state.active)
            )
        tau += 1

    survivors = [s.class_index for s in states if s.active]
    return SelectionReport(
        winner=survivors[0] if len(survivors) == 1 else None,
        survivors=survivors,
        inconclusive=inconclusive,
        epochs=epochs,
        total_steps=total_steps,
        elimination_log=eliminations,
        evaluations=records,
        delta=delta,
        arms=states,
    )
