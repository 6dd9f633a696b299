"""Training algorithms over episodic score-function gradients.

All learners share the same skeleton: roll out a batch of episodes, turn
each into a single-trajectory gradient estimate of the form
(scalar weight) * sum_t grad log pi(S_t, A_t), average, and take one Adam
ascent step. They differ only in the scalar weight:

* plain return maximization (reinforce):        R
* quadratic-utility maximization (equm):        alpha R - beta/2 R^2
* penalized variance constraint (tamar):        R - delta g'(.) (R^2 - 2 m R)
  with fast-timescale trackers m ~ E[R], q ~ E[R^2] feeding the penalty
* dual coordinate ascent (xie):                 2 y R - R^2,
  alternating with the closed-form dual step y <- m + 1/(2 delta)

The quadratic-utility objective never forms (E[R])^2, so its estimator is
unbiased from a single trajectory; the variance-based objectives work
around that term with trackers. ``compare_double_sampling_demo`` quantifies
the resulting plug-in bias exactly on an enumerable MDP.

``train_equm_ac`` is the n-step actor-critic variant with twin critics
tracking E[R from t] and E[R^2 from t].
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericFault
from .mdp import (
    EnvContract,
    ExactMoments,
    FiniteEnv,
    Trajectory,
    cumulative_reward,
    enumerate_trajectories,
    exact_mean_and_gradients,
    rollout,
)
from .metrics import evaluate
from .policy import AdamState, ValueMlp, adam_apply
from .rng import EVAL_DOMAIN, EVAL_STRIDE, FINAL_EVAL_DOMAIN, TRAIN_DOMAIN, RngStream


@dataclass(frozen=True)
class UtilitySpec:
    """Quadratic utility u(R) = alpha R - beta/2 R^2.

    ``zeta = alpha / beta`` is the implied target return (infinite when beta
    is 0, which collapses the objective to plain return maximization) and
    ``psi = beta / (2 alpha)`` the equivalent regularization weight.
    """

    alpha: float = 1.0
    beta: float = 0.0

    def __post_init__(self):
        if self.alpha <= 0.0:
            raise ValueError("alpha must be positive")
        if self.beta < 0.0:
            raise ValueError("beta must be nonnegative")

    @classmethod
    def from_target(cls, zeta: float) -> "UtilitySpec":
        if zeta <= 0.0:
            raise ValueError("target return zeta must be positive")
        if math.isinf(zeta):
            return cls(1.0, 0.0)
        return cls(1.0, 1.0 / zeta)

    @property
    def zeta(self) -> float:
        return math.inf if self.beta == 0.0 else self.alpha / self.beta

    @property
    def psi(self) -> float:
        return self.beta / (2.0 * self.alpha)

    def utility(self, r: float) -> float:
        return self.alpha * r - 0.5 * self.beta * r * r


REINFORCE_UTILITY = UtilitySpec(1.0, 0.0)


def score_sum(policy, traj: Trajectory) -> np.ndarray:
    """sum_t grad log pi(S_t, A_t) along one trajectory."""
    return policy.weighted_score_sum(traj.states(), traj.actions())


def episode_gradient_reinforce(policy, traj: Trajectory) -> np.ndarray:
    """Single-trajectory estimator of grad E[R]: R * sum_t grad log pi."""
    r = cumulative_reward(traj)
    return policy.weighted_score_sum(traj.states(), traj.actions(), r)


def episode_gradient_equm(policy, traj: Trajectory, u: UtilitySpec) -> np.ndarray:
    """Single-trajectory estimator of grad E[u(R)]:
    (alpha R - beta/2 R^2) * sum_t grad log pi."""
    r = cumulative_reward(traj)
    return policy.weighted_score_sum(
        traj.states(), traj.actions(), u.alpha * r - 0.5 * u.beta * r * r
    )


# ---------------------------------------------------------------------------
# Shared training loop
# ---------------------------------------------------------------------------


@dataclass
class LogRow:
    episode: int
    eval_cr: float
    eval_var: float
    objective_estimate: float
    wallclock_ms: float


@dataclass
class TrainingLog:
    rows: list[LogRow] = field(default_factory=list)

    def to_csv(self) -> str:
        lines = ["episode,eval_cr,eval_var,objective_estimate,wallclock_ms"]
        for r in self.rows:
            lines.append(
                f"{r.episode},{r.eval_cr:.17g},{r.eval_var:.17g},"
                f"{r.objective_estimate:.17g},{r.wallclock_ms:.3f}"
            )
        return "\n".join(lines) + "\n"


@dataclass
class TrainResult:
    policy: object
    log: TrainingLog
    extras: dict = field(default_factory=dict)


def _train_loop(
    env: EnvContract,
    policy,
    batch_update,
    adam: AdamState,
    *,
    episodes: int,
    batch: int,
    rng: RngStream,
    eval_every: int,
    eval_trials: int,
    eval_annualization: float,
    discount: float,
) -> TrainingLog:
    """Generic episode loop: ``batch_update(trajs)`` returns the (already
    averaged) ascent gradient and a scalar objective estimate."""
    if batch < 1:
        raise ValueError("batch must be >= 1")
    log = TrainingLog()
    t0 = time.perf_counter()
    done = 0
    checkpoint = 0
    while done < episodes:
        n = min(batch, episodes - done)
        trajs = [
            rollout(env, policy, rng.derive(TRAIN_DOMAIN + done + i), discount)
            for i in range(n)
        ]
        grad, objective = batch_update(trajs)
        if not np.all(np.isfinite(grad)):
            raise NumericFault(f"non-finite gradient at episode {done}")
        policy.set_theta(adam_apply(adam, policy.get_theta(), grad, ascent=True))
        done += n
        if eval_every > 0 and (done % eval_every == 0 or done >= episodes):
            checkpoint += 1
            report = evaluate(
                policy,
                env,
                max(eval_trials, 2),
                rng.derive(EVAL_DOMAIN + checkpoint * EVAL_STRIDE),
                annualization=eval_annualization,
                discount=discount,
            )
            log.rows.append(
                LogRow(
                    episode=done,
                    eval_cr=report.cr,
                    eval_var=report.var,
                    objective_estimate=objective,
                    wallclock_ms=(time.perf_counter() - t0) * 1e3,
                )
            )
    return log


def _mean_gradient(policy, trajs, weight_fn):
    grad = np.zeros(policy.n_params)
    objective = 0.0
    for traj in trajs:
        r = cumulative_reward(traj)
        w, obj = weight_fn(r)
        grad += policy.weighted_score_sum(traj.states(), traj.actions(), w)
        objective += obj
    k = len(trajs)
    return grad / k, objective / k


def train_reinforce(
    env,
    policy,
    *,
    episodes: int,
    batch: int = 1,
    rng: RngStream,
    adam: AdamState | None = None,
    eval_every: int = 200,
    eval_trials: int = 100,
    eval_annualization: float = 1.0,
    discount: float = 1.0,
) -> TrainResult:
    """Plain return-maximizing policy gradient."""
    return train_equm_pg(
        env,
        policy,
        REINFORCE_UTILITY,
        episodes=episodes,
        batch=batch,
        rng=rng,
        adam=adam,
        eval_every=eval_every,
        eval_trials=eval_trials,
        eval_annualization=eval_annualization,
        discount=discount,
    )


def train_equm_pg(
    env,
    policy,
    u: UtilitySpec,
    *,
    episodes: int,
    batch: int = 1,
    rng: RngStream,
    adam: AdamState | None = None,
    eval_every: int = 200,
    eval_trials: int = 100,
    eval_annualization: float = 1.0,
    discount: float = 1.0,
) -> TrainResult:
    """Quadratic-utility policy gradient; beta = 0 reproduces
    ``train_reinforce`` update-for-update under identical streams."""
    adam = adam or AdamState.fresh(policy.n_params)

    def weight(r: float):
        w = u.alpha * r - 0.5 * u.beta * r * r
        return w, w

    def update(trajs):
        return _mean_gradient(policy, trajs, weight)

    log = _train_loop(
        env,
        policy,
        update,
        adam,
        episodes=episodes,
        batch=batch,
        rng=rng,
        eval_every=eval_every,
        eval_trials=eval_trials,
        eval_annualization=eval_annualization,
        discount=discount,
    )
    return TrainResult(policy, log, {"utility": u})


@dataclass
class TamarConfig:
    """Penalized variance-constraint learner configuration.

    The penalty weight ``delta`` scales g(Var - eta); trackers for E[R] and
    E[R^2] run on the fast timescale ``tracker_rate``. ``one_sided=True``
    activates the constraint gradient only while the tracked variance
    exceeds ``eta``; ``False`` is the exact-equality reading.
    """

    delta: float = 0.5
    eta: float = 50.0
    penalty_g: str = "linear"  # "linear" or "quadratic"
    tracker_rate: float = 0.1
    one_sided: bool = True
    optimizer: AdamState | None = None

    def __post_init__(self):
        if self.delta < 0.0:
            raise ValueError("delta must be nonnegative")
        if not 0.0 < self.tracker_rate <= 1.0:
            raise ValueError("tracker_rate must lie in (0, 1]")
        if self.penalty_g not in ("linear", "quadratic"):
            raise ValueError(f"penalty_g must be linear or quadratic, got {self.penalty_g!r}")


def train_tamar(
    env,
    policy,
    cfg: TamarConfig,
    *,
    episodes: int,
    batch: int = 1,
    rng: RngStream,
    eval_every: int = 200,
    eval_trials: int = 100,
    eval_annualization: float = 1.0,
    discount: float = 1.0,
) -> TrainResult:
    """Two-timescale penalized learner.

    Exponential averages m ~ E[R] and q ~ E[R^2] update faster than theta;
    the per-episode ascent weight is
    R - delta g'(q - m^2 - eta) (R^2 - 2 m R), the tracker mean standing in
    for the second independent trajectory that an unbiased gradient of
    (E[R])^2 would require. With delta = 0 this is exactly the plain
    return-maximizing learner.
    """
    adam = cfg.optimizer or AdamState.fresh(policy.n_params)
    state = {"m": 0.0, "q": 0.0}

    def g_value(x: float) -> float:
        if cfg.one_sided and x <= 0.0:
            return 0.0
        return x if cfg.penalty_g == "linear" else x * x

    def g_prime(x: float) -> float:
        if cfg.one_sided and x <= 0.0:
            return 0.0
        return 1.0 if cfg.penalty_g == "linear" else 2.0 * x

    def update(trajs):
        grad = np.zeros(policy.n_params)
        objective = 0.0
        for traj in trajs:
            r = cumulative_reward(traj)
            state["m"] += cfg.tracker_rate * (r - state["m"])
            state["q"] += cfg.tracker_rate * (r * r - state["q"])
            if not math.isfinite(state["m"]) or not math.isfinite(state["q"]):
                raise NumericFault("tamar trackers diverged")
            m, q = state["m"], state["q"]
            gap = q - m * m - cfg.eta
            w = r - cfg.delta * g_prime(gap) * (r * r - 2.0 * m * r)
            grad += policy.weighted_score_sum(traj.states(), traj.actions(), w)
            objective += m - cfg.delta * g_value(gap)
        k = len(trajs)
        return grad / k, objective / k

    log = _train_loop(
        env,
        policy,
        update,
        adam,
        episodes=episodes,
        batch=batch,
        rng=rng,
        eval_every=eval_every,
        eval_trials=eval_trials,
        eval_annualization=eval_annualization,
        discount=discount,
    )
    return TrainResult(policy, log, {"tracked_mean": state["m"], "tracked_second": state["q"]})


@dataclass
class XieConfig:
    """Dual coordinate-ascent learner configuration; ``lambda_delta`` is the
    penalty coefficient (the experiment tables call it lambda)."""

    lambda_delta: float = 100.0
    tracker_rate: float = 0.1
    optimizer: AdamState | None = None

    def __post_init__(self):
        if self.lambda_delta <= 0.0:
            raise ValueError("lambda_delta must be positive")
        if not 0.0 < self.tracker_rate <= 1.0:
            raise ValueError("tracker_rate must lie in (0, 1]")


def xie_dual_step(tracked_mean: float, lambda_delta: float) -> float:
    """Closed-form block maximization of the dual scalar:
    y = tracked E[R] + 1 / (2 delta)."""
    return tracked_mean + 1.0 / (2.0 * lambda_delta)


def train_xie(
    env,
    policy,
    cfg: XieConfig,
    *,
    episodes: int,
    batch: int = 1,
    rng: RngStream,
    eval_every: int = 200,
    eval_trials: int = 100,
    eval_annualization: float = 1.0,
    discount: float = 1.0,
) -> TrainResult:
    """Coordinate ascent on 2 y (E[R] + 1/(2 delta)) - y^2 - E[R^2]:
    alternate the closed-form y step with a theta ascent step whose
    per-episode weight is 2 y R - R^2 (twice the quadratic-utility weight at
    alpha = y, beta = 1)."""
    adam = cfg.optimizer or AdamState.fresh(policy.n_params)
    state = {"m": 0.0, "y": 0.0}

    def update(trajs):
        returns = []
        for traj in trajs:
            r = cumulative_reward(traj)
            state["m"] += cfg.tracker_rate * (r - state["m"])
            if not math.isfinite(state["m"]):
                raise NumericFault("xie tracker diverged")
            returns.append(r)
        y = xie_dual_step(state["m"], cfg.lambda_delta)
        state["y"] = y
        grad = np.zeros(policy.n_params)
        objective = 0.0
        for traj, r in zip(trajs, returns):
            w = 2.0 * y * r - r * r
            grad += policy.weighted_score_sum(traj.states(), traj.actions(), w)
            objective += 2.0 * y * (r + 1.0 / (2.0 * cfg.lambda_delta)) - y * y - r * r
        k = len(trajs)
        return grad / k, objective / k

    log = _train_loop(
        env,
        policy,
        update,
        adam,
        episodes=episodes,
        batch=batch,
        rng=rng,
        eval_every=eval_every,
        eval_trials=eval_trials,
        eval_annualization=eval_annualization,
        discount=discount,
    )
    return TrainResult(policy, log, {"tracked_mean": state["m"], "dual_y": state["y"]})


@dataclass
class AcConfig:
    """n-step actor-critic configuration with twin value critics."""

    critic1: ValueMlp
    critic2: ValueMlp
    n_step: int = 1
    critic_lr: float = 0.01
    critic_weight_decay: float = 0.0
    optimizer: AdamState | None = None

    def __post_init__(self):
        if self.n_step < 1:
            raise ValueError("n_step must be >= 1")

    @classmethod
    def for_env(cls, env: EnvContract, rng: RngStream, n_step: int = 1, **kw) -> "AcConfig":
        d = env.state_dim
        dims = [d, d, d, 1]
        return cls(
            critic1=ValueMlp.glorot_init(dims, rng.derive(1)),
            critic2=ValueMlp.glorot_init(dims, rng.derive(2)),
            n_step=n_step,
            **kw,
        )


def ac_bootstrap_targets(
    rewards: np.ndarray,
    boot1: np.ndarray,
    boot2: np.ndarray,
    n_step: int,
    discount: float,
) -> tuple[np.ndarray, np.ndarray]:
    """n-step targets for the return and squared-return critics.

    boot1/boot2 hold the critic values at the bootstrap states S_{t+n} (zero
    past episode end). The squared target expands
    (R_{t:t+n-1} + g^n M1)^2 with M2 replacing the unknown second moment:
    R^2 + 2 g^n R M1 + g^2n M2.
    """
    tau = len(rewards)
    r1 = np.empty(tau)
    gn = discount**n_step
    for t in range(tau):
        end = min(t + n_step, tau)
        acc = 0.0
        f = 1.0
        for i in range(t, end):
            acc += f * rewards[i]
            f *= discount
        r1[t] = acc
    target1 = r1 + gn * boot1
    target2 = r1 * r1 + 2.0 * gn * r1 * boot1 + gn * gn * boot2
    return target1, target2


def train_equm_ac(
    env,
    policy,
    cfg: AcConfig,
    u: UtilitySpec,
    *,
    episodes: int,
    rng: RngStream,
    eval_every: int = 200,
    eval_trials: int = 100,
    eval_annualization: float = 1.0,
    discount: float = 1.0,
) -> TrainResult:
    """Actor-critic quadratic-utility learner.

    Per visited step the actor weight is the utility of the bootstrapped
    n-step targets minus the utility-combination of the critics at S_t (the
    baseline); both critics regress onto their targets by squared loss with
    their own Adam state.
    """
    adam = cfg.optimizer or AdamState.fresh(policy.n_params)
    adam1 = AdamState.fresh(
        cfg.critic1.n_params, lr=cfg.critic_lr, weight_decay=cfg.critic_weight_decay
    )
    adam2 = AdamState.fresh(
        cfg.critic2.n_params, lr=cfg.critic_lr, weight_decay=cfg.critic_weight_decay
    )

    def update(trajs):
        (traj,) = trajs
        states = traj.states()
        actions = traj.actions()
        rewards = traj.rewards()
        tau = len(rewards)
        v1 = cfg.critic1.values(states)
        v2 = cfg.critic2.values(states)
        boot1 = np.zeros(tau)
        boot2 = np.zeros(tau)
        for t in range(tau):
            tn = t + cfg.n_step
            if tn < tau:
                boot1[t] = v1[tn]
                boot2[t] = v2[tn]
        target1, target2 = ac_bootstrap_targets(rewards, boot1, boot2, cfg.n_step, discount)

        advantage = (u.alpha * target1 - 0.5 * u.beta * target2) - (
            u.alpha * v1 - 0.5 * u.beta * v2
        )
        actor_grad = policy.weighted_score_sum(states, actions, advantage)

        loss1 = float(np.mean((v1 - target1) ** 2))
        loss2 = float(np.mean((v2 - target2) ** 2))
        if not math.isfinite(loss1) or not math.isfinite(loss2):
            raise NumericFault("critic loss diverged")
        g1 = cfg.critic1.weighted_grad_sum(states, 2.0 * (v1 - target1) / tau)
        g2 = cfg.critic2.weighted_grad_sum(states, 2.0 * (v2 - target2) / tau)
        cfg.critic1.set_theta(adam_apply(adam1, cfg.critic1.get_theta(), g1, ascent=False))
        cfg.critic2.set_theta(adam_apply(adam2, cfg.critic2.get_theta(), g2, ascent=False))

        r = float(np.sum(rewards)) if discount == 1.0 else cumulative_reward(traj)
        return actor_grad, u.utility(r)

    log = _train_loop(
        env,
        policy,
        update,
        adam,
        episodes=episodes,
        batch=1,
        rng=rng,
        eval_every=eval_every,
        eval_trials=eval_trials,
        eval_annualization=eval_annualization,
        discount=discount,
    )
    return TrainResult(policy, log, {"critic1": cfg.critic1, "critic2": cfg.critic2})


# ---------------------------------------------------------------------------
# Double-sampling bias demonstration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DoubleSamplingReport:
    """Exact bias of the single-trajectory plug-in estimator of
    grad (E[R])^2, with the unbiased quadratic-utility estimator shown for
    contrast."""

    exact_grad_mean_squared: np.ndarray
    plug_in_average: np.ndarray
    gap: np.ndarray
    gap_norm: float
    equm_gap_norm: float


def compare_double_sampling_demo(
    env: FiniteEnv, policy, u: UtilitySpec = UtilitySpec(1.0, 1.0)
) -> DoubleSamplingReport:
    """Average the plug-in estimator 2 R (R sum_t grad log pi) over every
    trajectory with its exact probability and compare against the true
    grad (E[R])^2 = 2 E[R] grad E[R].

    The gap is the bias a single-sample variance-gradient method inherits;
    the quadratic-utility estimator has no (E[R])^2 term, so its probability-
    weighted average matches its exact gradient to rounding error.
    """
    exact = exact_mean_and_gradients(env, policy)
    plug_in = np.zeros(policy.n_params)
    equm_avg = np.zeros(policy.n_params)
    for traj, p in enumerate_trajectories(env, policy):
        r = cumulative_reward(traj)
        s = policy.weighted_score_sum(traj.states(), traj.actions())
        plug_in += p * 2.0 * r * r * s
        equm_avg += p * (u.alpha * r - 0.5 * u.beta * r * r) * s
    truth = exact.grad_mean_squared
    gap = plug_in - truth
    exact_equm = u.alpha * exact.grad_mean - 0.5 * u.beta * exact.grad_second_moment
    return DoubleSamplingReport(
        exact_grad_mean_squared=truth,
        plug_in_average=plug_in,
        gap=gap,
        gap_norm=float(np.max(np.abs(gap))),
        equm_gap_norm=float(np.max(np.abs(equm_avg - exact_equm))),
    )
