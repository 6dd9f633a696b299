"""Synthetic liquid / non-liquid two-asset portfolio MDP.

A liquid holding pays a fixed interest rate every period. Investing moves a
fraction ``fraction_w`` of the liquid balance into a non-liquid position that
resolves ``maturity_w`` periods later: with probability ``p_risk`` it
defaults and the principal is gone, otherwise the proceeds (principal times
the gross non-liquid rate) come back to the liquid pool. The non-liquid rate
flips between a low and a high level with probability ``p_switch`` per
period and, by default, is locked into a position at purchase time.

Accounting modes:

* ``compounding=True`` (default): proceeds and interest are reinvested into
  the liquid balance and the per-period reward is the change in total wealth
  (liquid + principal at risk), so the episode reward telescopes to final
  wealth minus initial capital. A defaulted principal shows up as a negative
  reward.
* ``compounding=False``: simple interest on the running balances is paid out
  as reward and never reinvested; matured principal returns to the liquid
  pool, a default loses it silently (reward never goes negative).

The always-hold policy is deterministic in both modes: cumulative reward
``capital_m * (r_liquid**horizon_t - 1)`` when compounding, and
``horizon_t * (r_liquid - 1) * capital_m`` otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..mdp import EnvContract, Episode

HOLD = 0
INVEST = 1


@dataclass(frozen=True)
class PortfolioSynthConfig:
    r_liquid: float = 1.001
    r_nl_low: float = 1.1
    r_nl_high: float = 2.0
    p_switch: float = 0.1
    p_risk: float = 0.05
    maturity_w: int = 4
    fraction_w: float = 0.2
    capital_m: float = 1.0
    horizon_t: int = 50
    compounding: bool = True
    lock_rate_at_purchase: bool = True
    initial_rate: str = "low"  # "low", "high" or "stationary" (fair coin)

    def __post_init__(self):
        if self.initial_rate not in ("low", "high", "stationary"):
            raise ValueError(f"initial_rate must be low, high or stationary, got {self.initial_rate!r}")
        if not 0.0 <= self.p_switch <= 1.0 or not 0.0 <= self.p_risk <= 1.0:
            raise ValueError("p_switch and p_risk must be probabilities")
        if self.r_nl_low >= self.r_nl_high:
            raise ValueError("r_nl_low must be below r_nl_high")
        if not 0.0 < self.fraction_w <= 1.0:
            raise ValueError("fraction_w must lie in (0, 1]")
        if self.maturity_w < 1 or self.horizon_t < 1:
            raise ValueError("maturity_w and horizon_t must be positive")

    def hold_always_cr(self) -> float:
        """Closed-form cumulative reward of the never-invest policy."""
        if self.compounding:
            return self.capital_m * (self.r_liquid**self.horizon_t - 1.0)
        return self.horizon_t * (self.r_liquid - 1.0) * self.capital_m


class _PortfolioEpisode(Episode):
    __slots__ = ("cfg", "t", "liquid", "sizes", "rates", "rate_high")

    def __init__(self, cfg: PortfolioSynthConfig, gen: np.random.Generator):
        self.cfg = cfg
        self.t = 0
        self.liquid = cfg.capital_m
        # slot i resolves after i+1 more periods; at most one position each
        self.sizes = [0.0] * cfg.maturity_w
        self.rates = [0.0] * cfg.maturity_w
        if cfg.initial_rate == "stationary":
            self.rate_high = gen.random() < 0.5
        else:
            self.rate_high = cfg.initial_rate == "high"
        self._observe()

    def _observe(self) -> None:
        # composition features are fractions of current wealth: the dynamics
        # are scale-free, so the policy input stays bounded even when the
        # compounding account grows the balances
        cfg = self.cfg
        wealth = self.liquid + sum(self.sizes)
        scale = wealth if wealth > 0.0 else cfg.capital_m
        obs = np.empty(3 + cfg.maturity_w)
        obs[0] = self.t / cfg.horizon_t
        obs[1] = self.liquid / scale
        obs[2] = 1.0 if self.rate_high else 0.0
        for i, s in enumerate(self.sizes):
            obs[3 + i] = s / scale
        self.observation = obs

    def _current_rate(self) -> float:
        return self.cfg.r_nl_high if self.rate_high else self.cfg.r_nl_low

    def step(self, action: int, gen: np.random.Generator) -> tuple[float, bool]:
        cfg = self.cfg
        reward = 0.0

        # queue a new position at the current rate (locked unless configured
        # to settle at the rate prevailing at maturity)
        staged_size = 0.0
        staged_rate = 0.0
        if action == INVEST and self.liquid > 0.0:
            staged_size = cfg.fraction_w * self.liquid
            self.liquid -= staged_size
            staged_rate = self._current_rate() if cfg.lock_rate_at_purchase else 0.0

        # interest on what stayed liquid this period
        interest = (cfg.r_liquid - 1.0) * self.liquid
        reward += interest
        if cfg.compounding:
            self.liquid += interest

        # advance the maturity pipeline; slot 0 resolves now
        due_size = self.sizes[0]
        due_rate = self.rates[0]
        self.sizes = self.sizes[1:] + [staged_size]
        self.rates = self.rates[1:] + [staged_rate]
        if due_size > 0.0:
            if gen.random() < cfg.p_risk:
                # default: principal is lost; only the compounding account
                # books the wealth destruction as negative reward
                if cfg.compounding:
                    reward -= due_size
            else:
                rate = due_rate if cfg.lock_rate_at_purchase else self._current_rate()
                payout = (rate - 1.0) * due_size
                reward += payout
                self.liquid += due_size + (payout if cfg.compounding else 0.0)

        if gen.random() < cfg.p_switch:
            self.rate_high = not self.rate_high

        self.t += 1
        self._observe()
        return reward, self.t >= cfg.horizon_t


class PortfolioSynthEnv(EnvContract):
    """Binary invest/hold MDP over the two-asset portfolio dynamics."""

    def __init__(self, config: PortfolioSynthConfig | None = None):
        self.config = config or PortfolioSynthConfig()

    @property
    def action_count(self) -> int:
        return 2

    @property
    def state_dim(self) -> int:
        return 3 + self.config.maturity_w

    @property
    def horizon_cap(self) -> int:
        return self.config.horizon_t

    def start(self, gen: np.random.Generator) -> Episode:
        return _PortfolioEpisode(self.config, gen)
