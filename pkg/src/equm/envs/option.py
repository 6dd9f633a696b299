"""American-style option exercise MDP.

The holder owns a call at ``strike_call`` and a put at ``strike_put`` on the
same asset and may exercise once at any step up to ``maturity``. Exercising
at price x pays max(0, strike_put - x) + max(0, x - strike_call) and ends
the episode; continuing pays nothing and the price moves multiplicatively,
up by ``f_up`` with probability ``p_up`` else down by ``f_down``. At
``maturity`` the payoff is collected regardless of the chosen action, so an
expiring in-the-money position is never wasted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..mdp import EnvContract, Episode

CONTINUE = 0
EXERCISE = 1


@dataclass(frozen=True)
class OptionEnvConfig:
    strike_call: float = 1.5
    strike_put: float = 1.0
    maturity: int = 20
    x0: float = 1.0
    p_up: float = 0.45
    f_up: float = 9.0 / 8.0
    f_down: float = 8.0 / 9.0

    def __post_init__(self):
        if not 0.0 <= self.p_up <= 1.0:
            raise ValueError("p_up must be a probability")
        if self.f_up <= 1.0 or not 0.0 < self.f_down < 1.0:
            raise ValueError("need f_up > 1 and f_down in (0, 1)")
        if self.maturity < 1:
            raise ValueError("maturity must be positive")

    def payoff(self, x: float) -> float:
        return max(0.0, self.strike_put - x) + max(0.0, x - self.strike_call)

    def max_price(self) -> float:
        return self.x0 * self.f_up**self.maturity


class _OptionEpisode(Episode):
    __slots__ = ("cfg", "t", "x")

    def __init__(self, cfg: OptionEnvConfig, gen: np.random.Generator):
        self.cfg = cfg
        self.t = 0
        self.x = cfg.x0
        self._observe()

    def _observe(self) -> None:
        self.observation = np.array([self.x, self.t / self.cfg.maturity])

    def step(self, action: int, gen: np.random.Generator) -> tuple[float, bool]:
        cfg = self.cfg
        if action == EXERCISE or self.t >= cfg.maturity:
            return cfg.payoff(self.x), True
        self.x *= cfg.f_up if gen.random() < cfg.p_up else cfg.f_down
        self.t += 1
        self._observe()
        return 0.0, False


class AmericanOptionEnv(EnvContract):
    """Exercise/continue MDP over the multiplicative price walk."""

    def __init__(self, config: OptionEnvConfig | None = None):
        self.config = config or OptionEnvConfig()

    @property
    def action_count(self) -> int:
        return 2

    @property
    def state_dim(self) -> int:
        return 2

    @property
    def horizon_cap(self) -> int:
        return self.config.maturity + 1

    def start(self, gen: np.random.Generator) -> Episode:
        return _OptionEpisode(self.config, gen)
