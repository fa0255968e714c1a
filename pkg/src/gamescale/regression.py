"""Strategic linear regression with a perturbation-choosing population.

Inputs are standard Gaussian; the true relation is y = beta^T x; a strategic
population shifts every input by e = k * beta/|beta| with k in a bounded
interval. The learner fits either a linear model (small class) or a linear
model plus an exp(-|x|^2) bump feature (large class). Both best responses
have closed forms; the population leads (Stackelberg) by choosing k to
maximize its expected prediction. The large class fits better pointwise yet
loses more at equilibrium.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(eq=False)
class RegressionInstance:
    beta: np.ndarray
    k_range: tuple[float, float] = (-10.0, 10.0)

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)
        if self.beta.ndim != 1 or float(np.linalg.norm(self.beta)) == 0.0:
            raise ValueError("beta must be a nonzero vector")
        if self.k_range[0] > self.k_range[1]:
            raise ValueError("empty k range")

    @property
    def dim(self) -> int:
        return self.beta.shape[0]

    @property
    def beta_norm(self) -> float:
        return float(np.linalg.norm(self.beta))

    def shift(self, k: float) -> np.ndarray:
        """Perturbation vector e = k * beta / |beta|."""
        return k * self.beta / self.beta_norm


@dataclass
class LargeModelClosedForm:
    """Scalars of the bump-feature best response at shift magnitude k."""

    m: float
    y: float
    z: float
    c: float
    p: float


@dataclass
class StackelbergOutcome:
    model_class: str
    k_star: float
    learner_loss: float
    env_objective: float


@dataclass
class ModelClassComparison:
    small: StackelbergOutcome
    large: StackelbergOutcome
    reverse_scaling: bool
    pointwise_dominance: bool


# ---------------------------------------------------------------------------
# Small model (pure linear)
# ---------------------------------------------------------------------------


def small_model_best_theta(instance: RegressionInstance, k: float) -> np.ndarray:
    """Population least-squares fit theta = (I - e e^T / (1 + |e|^2)) beta."""
    e = instance.shift(k)
    beta = instance.beta
    return beta - e * float(e @ beta) / (1.0 + float(e @ e))

def linear_population_loss(instance: RegressionInstance, theta: np.ndarray, k: float) -> float:
    """E[(beta^T x - theta^T (x + e))^2] = |beta - theta|^2 + (theta^T e)^2."""
    e = instance.shift(k)
    diff = instance.beta - theta
    return float(diff @ diff) + float(theta @ e) ** 2


def small_model_loss(instance: RegressionInstance, k: float) -> float:
    """Best-response learner loss of the small class, |beta|^2 k^2/(1+k^2)."""
    return linear_population_loss(instance, small_model_best_theta(instance, k), k)


def small_model_env_objective(instance: RegressionInstance, k: float) -> float:
    """Expected prediction theta*(e)^T e = k |beta| / (1 + k^2)."""
    return float(small_model_best_theta(instance, k) @ instance.shift(k))


def small_model_equilibrium(instance: RegressionInstance) -> StackelbergOutcome:
    k_star = _argmax_1d(lambda k: small_model_env_objective(instance, k), *instance.k_range)
    return StackelbergOutcome(
        model_class="small",
        k_star=k_star,
        learner_loss=small_model_loss(instance, k_star),
        env_objective=small_model_env_objective(instance, k_star),
    )


# ---------------------------------------------------------------------------
# Large model (linear + Gaussian bump feature)
# ---------------------------------------------------------------------------


def large_model_closed_form(instance: RegressionInstance, k: float) -> LargeModelClosedForm:
    d = instance.dim
    m = (1.0 / 3.0) ** (d / 2.0 + 1.0) * math.exp(-k * k / 3.0)
    y = (1.0 / 5.0) ** (d / 2.0) * math.exp(-2.0 * k * k / 5.0)
    z = -(1.0 / (1.0 + k * k)) * (m * m / y)
    c = (1.0 / (1.0 + z * k * k)) * (1.0 / (1.0 + k * k)) * (1.0 + 2.0 * (m * m / y) * k * k)
    p = -(m / y) * k * (2.0 + c)
    return LargeModelClosedForm(m=m, y=y, z=z, c=c, p=p)


def large_model_best_theta(instance: RegressionInstance, k: float) -> tuple[np.ndarray, float]:
    """Best-response coefficients (theta_1, theta_2) = (c beta, p |beta|)."""
    cf = large_model_closed_form(instance, k)
    return cf.c * instance.beta, cf.p * instance.beta_norm


def large_model_learner_loss(instance: RegressionInstance, k: float) -> float:
    cf = large_model_closed_form(instance, k)
    c, p, m, y = cf.c, cf.p, cf.m, cf.y
    k2 = k * k
    factor = 1.0 - 2.0 * c + c * c + c * c * k2 + 2.0 * p * m * c * k + 4.0 * p * m * k + p * p * y
    return factor * instance.beta_norm**2


def large_model_env_objective(instance: RegressionInstance, k: float) -> float:
    """Expected prediction of the fitted bump model, |beta| (c k + 3 m p)."""
    cf = large_model_closed_form(instance, k)
    return instance.beta_norm * (cf.c * k + 3.0 * cf.m * cf.p)


def large_model_equilibrium(instance: RegressionInstance) -> StackelbergOutcome:
    k_star = _argmax_1d(lambda k: large_model_env_objective(instance, k), *instance.k_range)
    return StackelbergOutcome(
        model_class="large",
        k_star=k_star,
        learner_loss=large_model_learner_loss(instance, k_star),
        env_objective=large_model_env_objective(instance, k_star),
    )


def compare_model_classes(
    instance: RegressionInstance, pointwise_tol: float = 1e-9
) -> ModelClassComparison:
    """Both Stackelberg equilibria plus the pointwise fit comparison.

    reverse_scaling is true when the larger class loses more at its own
    equilibrium even though its best-response loss is no worse at any k.
    """
    small = small_model_equilibrium(instance)
    large = large_model_equilibrium(instance)
    lo, hi = instance.k_range
    ks = np.arange(lo, hi + 1e-12, 1e-3) if hi > lo else np.array([lo])
    pointwise = all(
        large_model_learner_loss(instance, float(k))
        <= small_model_loss(instance, float(k)) + pointwise_tol
        for k in ks
    )
    return ModelClassComparison(
        small=small,
        large=large,
        reverse_scaling=large.learner_loss > small.learner_loss,
        pointwise_dominance=pointwise,
    )


def _argmax_1d(f, lo: float, hi: float, spacing: float = 1e-3, zoom_rounds: int = 2) -> float:
    """Grid argmax refined by 10x zoom rounds; first maximizer wins ties."""
    if hi <= lo:
        return lo
    for _ in range(zoom_rounds + 1):
        n = max(int(round((hi - lo) / spacing)) + 1, 2)
        ks = np.linspace(lo, hi, n)
        vals = [f(float(k)) for k in ks]
        best = int(np.argmax(vals))
        lo_new = max(lo, float(ks[best]) - spacing)
        hi_new = min(hi, float(ks[best]) + spacing)
        lo, hi = lo_new, hi_new
        spacing /= 10.0
    return float(ks[best])


# ---------------------------------------------------------------------------
# Monte-Carlo oracles (independent of every closed form above)
# ---------------------------------------------------------------------------


def _draw_inputs(instance: RegressionInstance, k: float, n: int, rng: np.random.Generator):
    x = rng.standard_normal((n, instance.dim))
    shifted = x + instance.shift(k)
    return x, shifted


def mc_gaussian_integrals(
    instance: RegressionInstance, k: float, n: int, rng: np.random.Generator
) -> dict[str, tuple[float, float]]:
    """Estimates (mean, standard error) of E[exp(-|x+e|^2)] and E[exp(-2|x+e|^2)]."""
    _, shifted = _draw_inputs(instance, k, n, rng)
    sq = np.einsum("ij,ij->i", shifted, shifted)
    out = {}
    for name, scale in (("exp1", 1.0), ("exp2", 2.0)):
        vals = np.exp(-scale * sq)
        out[name] = (float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n)))
    return out


def mc_model_loss(
    instance: RegressionInstance,
    k: float,
    theta1: np.ndarray,
    theta2: float,
    n: int,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """Population squared error of a fixed (theta1, theta2) bump model.

    theta2 = 0 recovers the pure linear model.
    """
    x, shifted = _draw_inputs(instance, k, n, rng)
    pred = shifted @ theta1 + theta2 * np.exp(-np.einsum("ij,ij->i", shifted, shifted))
    res_sq = (x @ instance.beta - pred) ** 2
    return float(res_sq.mean()), float(res_sq.std(ddof=1) / math.sqrt(n))


def mc_env_prediction(
    instance: RegressionInstance,
    k: float,
    theta1: np.ndarray,
    theta2: float,
    n: int,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """Expected prediction E[theta1^T (x+e) + theta2 exp(-|x+e|^2)]."""
    _, shifted = _draw_inputs(instance, k, n, rng)
    pred = shifted @ theta1 + theta2 * np.exp(-np.einsum("ij,ij->i", shifted, shifted))
    return float(pred.mean()), float(pred.std(ddof=1) / math.sqrt(n))


def mc_least_squares(
    instance: RegressionInstance,
    k: float,
    n: int,
    rng: np.random.Generator,
    with_bump: bool,
) -> tuple[np.ndarray, np.ndarray]:
    """Sample least-squares fit and sandwich standard errors per coefficient.

    Features are (x + e) alone, or with the exp(-|x+e|^2) bump appended.
    """
    x, shifted = _draw_inputs(instance, k, n, rng)
    if with_bump:
        bump = np.exp(-np.einsum("ij,ij->i", shifted, shifted))
        features = np.column_stack([shifted, bump])
    else:
        features = shifted
    target = x @ instance.beta
    theta_hat, *_ = np.linalg.lstsq(features, target, rcond=None)
    residual = target - features @ theta_hat
    a = features.T @ features / n
    b = (features * residual[:, None]).T @ (features * residual[:, None]) / n
    a_inv = np.linalg.inv(a)
    cov = a_inv @ b @ a_inv / n
    return theta_hat, np.sqrt(np.diag(cov))
