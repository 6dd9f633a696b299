"""Data-driven portfolio environment over ingested monthly return matrices.

``load_returns_csv`` reads a plain CSV whose first column is a YYYYMM date
and whose remaining columns are per-asset simple returns. The environment
presents the trailing ``lookback`` months of all asset returns as the state;
an action is either an asset index (one-hot portfolio, used when sampling
actions during score-function training) or a full weight vector (used at
evaluation time, where the policy's softmax output is the portfolio).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, IngestError
from ..mdp import EnvContract, Episode


@dataclass(frozen=True)
class CsvFormatSpec:
    units: str = "fraction"  # "percent" or "fraction"
    date_column: str = "date"
    sentinel_values: tuple[float, ...] = (-99.99, -999.0)
    sentinel_policy: str = "error"  # "error" or "drop_row"

    def __post_init__(self):
        if self.units not in ("percent", "fraction"):
            raise ConfigError(f"units must be percent or fraction, got {self.units!r}")
        if self.sentinel_policy not in ("error", "drop_row"):
            raise ConfigError(f"sentinel_policy must be error or drop_row, got {self.sentinel_policy!r}")


@dataclass(frozen=True)
class ReturnsMatrix:
    asset_names: tuple[str, ...]
    dates: tuple[int, ...]  # YYYYMM, strictly increasing
    returns: np.ndarray  # (months, assets) fractional simple returns

    @property
    def n_months(self) -> int:
        return len(self.dates)

    @property
    def n_assets(self) -> int:
        return len(self.asset_names)


def _is_sentinel(value: float, sentinels: tuple[float, ...]) -> bool:
    return any(math.isclose(value, s, abs_tol=1e-9) for s in sentinels)


def load_returns_csv(path, fmt: CsvFormatSpec | None = None) -> ReturnsMatrix:
    """Ingest a returns CSV into a validated :class:`ReturnsMatrix`.

    Raises :class:`IngestError` naming the row and column on malformed
    values, non-monotone dates, or (under the default policy) sentinel
    missing-value markers.
    """
    fmt = fmt or CsvFormatSpec()
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        rows = [row for row in reader if row and any(cell.strip() for cell in row)]
    if len(rows) < 2:
        raise IngestError(f"{path}: need a header and at least one data row")
    header = [cell.strip() for cell in rows[0]]
    if header[0] != fmt.date_column:
        raise IngestError(
            f"{path}: first column is {header[0]!r}, expected date column {fmt.date_column!r}"
        )
    asset_names = tuple(header[1:])
    if not asset_names:
        raise IngestError(f"{path}: no asset columns")

    dates: list[int] = []
    data: list[list[float]] = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise IngestError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
        raw_date = row[0].strip()
        if len(raw_date) != 6 or not raw_date.isdigit():
            raise IngestError(f"{path}:{lineno}: malformed YYYYMM date {raw_date!r}")
        month = int(raw_date[4:6])
        if not 1 <= month <= 12:
            raise IngestError(f"{path}:{lineno}: month out of range in {raw_date!r}")
        values = []
        drop = False
        for col, cell in zip(asset_names, row[1:]):
            try:
                v = float(cell)
            except ValueError:
                raise IngestError(f"{path}:{lineno}: column {col!r}: not a number: {cell!r}") from None
            if _is_sentinel(v, fmt.sentinel_values):
                if fmt.sentinel_policy == "drop_row":
                    drop = True
                    break
                raise IngestError(
                    f"{path}:{lineno}: column {col!r}: missing-value sentinel {v}"
                )
            values.append(v)
        if drop:
            continue
        dates.append(int(raw_date))
        data.append(values)

    if not dates:
        raise IngestError(f"{path}: no usable data rows")
    for prev, cur in zip(dates, dates[1:]):
        if cur <= prev:
            raise IngestError(f"{path}: dates not strictly increasing at {prev} -> {cur}")

    returns = np.array(data, dtype=np.float64)
    if fmt.units == "percent":
        returns = returns / 100.0
    return ReturnsMatrix(asset_names, tuple(dates), returns)


@dataclass(frozen=True)
class DatasetPortfolioConfig:
    """Episode layout over a returns matrix.

    ``start_lo``/``start_hi`` bound (inclusive) the month index of the first
    rebalancing step; an episode starting at t0 consumes state history
    [t0 - lookback, t0) and produces rewards for months [t0, t0 +
    episode_len).
    """

    lookback: int = 12
    episode_len: int = 12
    start_lo: int = 12
    start_hi: int = 12

    def __post_init__(self):
        if self.lookback < 1 or self.episode_len < 1:
            raise ConfigError("lookback and episode_len must be positive")
        if self.start_hi < self.start_lo:
            raise ConfigError("start_hi must be >= start_lo")

    def validate_against(self, matrix: ReturnsMatrix) -> None:
        if self.start_lo < self.lookback:
            raise ConfigError(
                f"episode start {self.start_lo} needs {self.lookback} months of history"
            )
        if self.start_hi + self.episode_len > matrix.n_months:
            raise ConfigError(
                f"episode starting at {self.start_hi} needs months up to "
                f"{self.start_hi + self.episode_len}, matrix has {matrix.n_months}"
            )


class _DatasetEpisode(Episode):
    __slots__ = ("env", "t0", "i")

    def __init__(self, env: "DatasetPortfolioEnv", gen: np.random.Generator):
        cfg = env.config
        span = cfg.start_hi - cfg.start_lo + 1
        self.env = env
        self.t0 = cfg.start_lo + (int(gen.integers(span)) if span > 1 else 0)
        self.i = 0
        self._observe()

    def _observe(self) -> None:
        cfg = self.env.config
        t = self.t0 + self.i
        window = self.env.matrix.returns[t - cfg.lookback : t]
        self.observation = window.ravel().copy()

    def _advance(self) -> bool:
        self.i += 1
        terminal = self.i >= self.env.config.episode_len
        if not terminal:
            self._observe()
        return terminal

    def step(self, action: int, gen: np.random.Generator) -> tuple[float, bool]:
        reward = float(self.env.matrix.returns[self.t0 + self.i, action])
        return reward, self._advance()

    def step_weights(self, weights: np.ndarray) -> tuple[float, bool]:
        """Advance using a full portfolio weight vector as the action."""
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (self.env.matrix.n_assets,):
            raise ConfigError(f"weight vector shape {w.shape} does not match asset count")
        if np.any(w < -1e-12) or not math.isclose(float(w.sum()), 1.0, abs_tol=1e-9):
            raise ConfigError("weights must be nonnegative and sum to 1")
        reward = float(self.env.matrix.returns[self.t0 + self.i] @ w)
        return reward, self._advance()


class DatasetPortfolioEnv(EnvContract):
    """Monthly rebalancing episodes over an ingested returns matrix."""

    def __init__(self, matrix: ReturnsMatrix, config: DatasetPortfolioConfig | None = None):
        self.matrix = matrix
        self.config = config or DatasetPortfolioConfig()
        self.config.validate_against(matrix)

    @property
    def action_count(self) -> int:
        return self.matrix.n_assets

    @property
    def state_dim(self) -> int:
        return self.matrix.n_assets * self.config.lookback

    @property
    def horizon_cap(self) -> int:
        return self.config.episode_len

    def start(self, gen: np.random.Generator) -> Episode:
        return _DatasetEpisode(self, gen)
