"""Episodic MDP core: trajectory types, rollout, and an exact enumeration
oracle for small finite MDPs.

Environments are immutable configuration objects; all per-episode mutable
state lives on the :class:`Episode` handle returned by ``start``, so rollouts
with distinct :class:`~equm.rng.RngStream` addresses can run concurrently.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, EnumerationBudget
from .rng import RngStream, sample_categorical

ENUMERATION_HORIZON_LIMIT = 12
ENUMERATION_TRAJECTORY_LIMIT = 1_000_000


@dataclass(slots=True)
class Transition:
    state: np.ndarray
    action: int
    reward: float
    next_is_terminal: bool


@dataclass(slots=True)
class Trajectory:
    """One episode: the visited (state, action, reward) record.

    ``truncated`` marks episodes cut off by the horizon cap without reaching
    a terminal state; learners treat truncation as terminal with zero
    continuation, but the flag stays visible so improper environment
    configurations are not silently absorbed.
    """

    steps: list[Transition]
    discount: float = 1.0
    truncated: bool = False

    @property
    def stopping_time(self) -> int:
        return len(self.steps)

    def states(self) -> np.ndarray:
        return np.stack([st.state for st in self.steps])

    def actions(self) -> np.ndarray:
        return np.array([st.action for st in self.steps], dtype=np.int64)

    def rewards(self) -> np.ndarray:
        return np.array([st.reward for st in self.steps])


def cumulative_reward(traj: Trajectory) -> float:
    """Discounted cumulative reward sum_t discount^(t-1) * r_t."""
    if not traj.steps:
        raise ValueError("cumulative_reward of an empty trajectory")
    if traj.discount == 1.0:
        return float(sum(st.reward for st in traj.steps))
    acc = 0.0
    f = 1.0
    for st in traj.steps:
        acc += f * st.reward
        f *= traj.discount
    return acc


class Episode(ABC):
    """Mutable per-rollout state of one environment episode."""

    observation: np.ndarray

    @abstractmethod
    def step(self, action: int, gen: np.random.Generator) -> tuple[float, bool]:
        """Apply ``action``; returns (reward, terminal) and advances
        ``observation``."""


class EnvContract(ABC):
    """Immutable environment configuration plus episode factory."""

    @property
    @abstractmethod
    def action_count(self) -> int: ...

    @property
    @abstractmethod
    def state_dim(self) -> int: ...

    @property
    @abstractmethod
    def horizon_cap(self) -> int: ...

    @abstractmethod
    def start(self, gen: np.random.Generator) -> Episode:
        """Begin a new episode; all of its randomness comes from ``gen``."""


def rollout(env: EnvContract, policy, rng: RngStream, discount: float = 1.0) -> Trajectory:
    """Sample one episode from ``env`` under ``policy``.

    Bit-identical for identical (env config, policy parameters, rng).
    Episodes that hit ``env.horizon_cap`` without terminating are truncated
    and flagged.
    """
    if not 0.0 < discount <= 1.0:
        raise ValueError(f"discount must lie in (0, 1], got {discount}")
    if policy.action_count != env.action_count:
        raise DimensionMismatch(
            f"policy has {policy.action_count} actions, env expects {env.action_count}"
        )
    gen = rng.generator()
    ep = env.start(gen)
    steps: list[Transition] = []
    for _ in range(env.horizon_cap):
        state = ep.observation
        probs = policy.action_probs(state)
        action = sample_categorical(gen, probs)
        reward, terminal = ep.step(action, gen)
        steps.append(Transition(state, action, reward, terminal))
        if terminal:
            return Trajectory(steps, discount)
    return Trajectory(steps, discount, truncated=True)


class FiniteEnv(EnvContract):
    """Environment with explicitly enumerable states and transitions."""

    @abstractmethod
    def initial_states(self) -> list[tuple[int, float]]:
        """(state_id, probability) pairs of the initial distribution."""

    @abstractmethod
    def observe(self, state_id: int) -> np.ndarray:
        """Feature vector presented to policies at ``state_id``."""

    @abstractmethod
    def branches(self, state_id: int, action: int) -> list[tuple[int, float, float, bool]]:
        """(next_state_id, reward, probability, terminal) outcomes."""


def enumerate_trajectories(
    env: FiniteEnv, policy, discount: float = 1.0
) -> list[tuple[Trajectory, float]]:
    """Every positive-probability trajectory of a small finite MDP.

    Probabilities are products of initial, policy and transition
    probabilities and sum to 1 up to float rounding. Raises
    :class:`EnumerationBudget` when the instance is too large to be used as
    an oracle.
    """
    if env.horizon_cap > ENUMERATION_HORIZON_LIMIT:
        raise EnumerationBudget(
            f"horizon {env.horizon_cap} exceeds enumeration limit {ENUMERATION_HORIZON_LIMIT}"
        )
    obs_cache: dict[int, np.ndarray] = {}

    def obs(sid: int) -> np.ndarray:
        if sid not in obs_cache:
            obs_cache[sid] = env.observe(sid)
        return obs_cache[sid]

    out: list[tuple[Trajectory, float]] = []

    def expand(sid: int, prob: float, steps: list[Transition], depth: int) -> None:
        if len(out) > ENUMERATION_TRAJECTORY_LIMIT:
            raise EnumerationBudget(
                f"more than {ENUMERATION_TRAJECTORY_LIMIT} trajectories"
            )
        state = obs(sid)
        probs = policy.action_probs(state)
        for action in range(env.action_count):
            p_a = float(probs[action])
            if p_a == 0.0:
                continue
            for nsid, reward, p_t, terminal in env.branches(sid, action):
                if p_t == 0.0:
                    continue
                branch = steps + [Transition(state, action, reward, terminal)]
                p = prob * p_a * p_t
                if terminal:
                    out.append((Trajectory(branch, discount), p))
                elif depth + 1 >= env.horizon_cap:
                    out.append((Trajectory(branch, discount, truncated=True), p))
                else:
                    expand(nsid, p, branch, depth + 1)

    for sid, p0 in env.initial_states():
        if p0 > 0.0:
            expand(sid, p0, [], 0)
    return out


@dataclass(frozen=True)
class ExactMoments:
    """Exact first/second moments of the cumulative reward and their
    policy gradients, computed by full enumeration."""

    mean: float
    second_moment: float
    grad_mean: np.ndarray
    grad_second_moment: np.ndarray

    @property
    def variance(self) -> float:
        return self.second_moment - self.mean**2

    @property
    def grad_mean_squared(self) -> np.ndarray:
        """Gradient of (E[R])^2 = 2 E[R] grad E[R]."""
        return 2.0 * self.mean * self.grad_mean


def exact_mean_and_gradients(env: FiniteEnv, policy, discount: float = 1.0) -> ExactMoments:
    """Exact E[R], E[R^2] and their gradients under ``policy``.

    Gradients use the score identity: grad E[f(R)] equals the
    probability-weighted sum of f(R_k) * sum_t grad log pi(S_t, A_t) over all
    enumerated trajectories (transition probabilities carry no policy
    parameters).
    """
    mean = 0.0
    second = 0.0
    g_mean = np.zeros(policy.n_params)
    g_second = np.zeros(policy.n_params)
    for traj, p in enumerate_trajectories(env, policy, discount):
        r = cumulative_reward(traj)
        score = policy.weighted_score_sum(traj.states(), traj.actions())
        mean += p * r
        second += p * r * r
        g_mean += (p * r) * score
        g_second += (p * r * r) * score
    return ExactMoments(mean, second, g_mean, g_second)


# ---------------------------------------------------------------------------
# Small explicit MDPs, used as enumeration-oracle fixtures and demo targets.
# ---------------------------------------------------------------------------


class _TabularEpisode(Episode):
    def __init__(self, env: "TabularEnv", gen: np.random.Generator):
        self.env = env
        init = env.initial_states()
        u = gen.random()
        acc = 0.0
        sid = init[-1][0]
        for s, p in init:
            acc += p
            if u < acc:
                sid = s
                break
        self.sid = sid
        self.observation = env.observe(sid)

    def step(self, action: int, gen: np.random.Generator) -> tuple[float, bool]:
        outcomes = self.env.branches(self.sid, action)
        u = gen.random()
        acc = 0.0
        chosen = outcomes[-1]
        for out in outcomes:
            acc += out[2]
            if u < acc:
                chosen = out
                break
        nsid, reward, _, terminal = chosen
        self.sid = nsid
        self.observation = self.env.observe(nsid)
        return reward, terminal


class TabularEnv(FiniteEnv):
    """Finite MDP given by an explicit outcome table.

    ``table[(s, a)]`` lists (next_state, reward, probability, terminal)
    outcomes; states are observed as one-hot feature vectors.
    """

    def __init__(
        self,
        n_states: int,
        n_actions: int,
        table: dict[tuple[int, int], list[tuple[int, float, float, bool]]],
        init: list[tuple[int, float]],
        horizon_cap: int,
    ):
        self._n_states = n_states
        self._n_actions = n_actions
        self._table = table
        self._init = init
        self._horizon = horizon_cap
        for key, outcomes in table.items():
            total = sum(p for _, _, p, _ in outcomes)
            if not math.isclose(total, 1.0, abs_tol=1e-9):
                raise ValueError(f"outcome probabilities at {key} sum to {total}")
        if not math.isclose(sum(p for _, p in init), 1.0, abs_tol=1e-9):
            raise ValueError("initial distribution does not sum to 1")

    @property
    def action_count(self) -> int:
        return self._n_actions

    @property
    def state_dim(self) -> int:
        return self._n_states

    @property
    def horizon_cap(self) -> int:
        return self._horizon

    @property
    def n_states(self) -> int:
        return self._n_states

    def initial_states(self) -> list[tuple[int, float]]:
        return list(self._init)

    def observe(self, state_id: int) -> np.ndarray:
        v = np.zeros(self._n_states)
        v[state_id] = 1.0
        return v

    def branches(self, state_id: int, action: int) -> list[tuple[int, float, float, bool]]:
        return self._table[(state_id, action)]

    def start(self, gen: np.random.Generator) -> Episode:
        return _TabularEpisode(self, gen)


def bandit_env(rewards: tuple[float, ...] = (0.0, 2.0)) -> TabularEnv:
    """One-state, one-step bandit; arm k pays rewards[k] deterministically."""
    table = {(0, a): [(0, float(r), 1.0, True)] for a, r in enumerate(rewards)}
    return TabularEnv(1, len(rewards), table, [(0, 1.0)], horizon_cap=1)


def binary_tree_env(
    slip: float = 0.0,
    root_rewards: tuple[float, float] = (0.0, 1.0),
    leaf_rewards: tuple[tuple[float, float], tuple[float, float]] = ((2.0, -1.0), (0.5, 3.0)),
) -> TabularEnv:
    """Two-step, two-action tree: root (state 0) branches into states 1/2.

    With ``slip`` > 0 the root transition lands on the opposite child with
    that probability, exercising transition randomness in the enumeration
    oracle; the default is the deterministic 4-trajectory tree.
    """
    table: dict[tuple[int, int], list[tuple[int, float, float, bool]]] = {}
    for a in (0, 1):
        target, other = 1 + a, 2 - a
        r = float(root_rewards[a])
        if slip == 0.0:
            table[(0, a)] = [(target, r, 1.0, False)]
        else:
            table[(0, a)] = [(target, r, 1.0 - slip, False), (other, r, slip, False)]
    for s in (1, 2):
        for a in (0, 1):
            table[(s, a)] = [(s, float(leaf_rewards[s - 1][a]), 1.0, True)]
    return TabularEnv(3, 2, table, [(0, 1.0)], horizon_cap=2)


def constant_reward_env(n_steps: int = 2, reward: float = 1.0, n_actions: int = 2) -> TabularEnv:
    """Chain whose reward never depends on the action taken."""
    table: dict[tuple[int, int], list[tuple[int, float, float, bool]]] = {}
    for s in range(n_steps):
        last = s == n_steps - 1
        nxt = s if last else s + 1
        for a in range(n_actions):
            table[(s, a)] = [(nxt, float(reward), 1.0, last)]
    return TabularEnv(n_steps, n_actions, table, [(0, 1.0)], horizon_cap=n_steps)


def nonterminating_env(n_actions: int = 2, horizon_cap: int = 8) -> TabularEnv:
    """Self-loop that never reaches a terminal state; rollouts must truncate."""
    table = {(0, a): [(0, 0.0, 1.0, False)] for a in range(n_actions)}
    return TabularEnv(1, n_actions, table, [(0, 1.0)], horizon_cap=horizon_cap)
