"""Evaluation statistics and Pareto-frontier extraction.

CR is the mean per-trial cumulative reward, Var its population variance
(divisor n). The return/risk ratio multiplies CR / sqrt(Var) by an
annualization constant: sqrt(12) is the monthly-data convention, synthetic
environments pass 1.0 to report the raw ratio. Maximum drawdown follows the
peak-to-trough definition on compounded wealth W_t = prod(1 + y_t) and is
kept signed (<= 0) internally; human-facing tables print its magnitude.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .mdp import EnvContract, cumulative_reward, rollout
from .rng import RngStream

MONTHLY_ANNUALIZATION = math.sqrt(12.0)

EVAL_CSV_COLUMNS = ["label", "n_trials", "cr", "var", "rr", "maxdd", "mse_zeta", "zeta"]


@dataclass
class EvalReport:
    """Per-policy evaluation statistics over repeated environment trials."""

    label: str
    n_trials: int
    cr: float
    var: float
    rr: float
    maxdd: float
    mse_to_target: float | None = None
    zeta: float | None = None
    degenerate_var: bool = False
    returns: np.ndarray | None = None

    def csv_row(self) -> list[str]:
        def fmt(x):
            return "" if x is None else f"{x:.17g}"

        return [
            self.label,
            str(self.n_trials),
            fmt(self.cr),
            fmt(self.var),
            fmt(self.rr),
            fmt(self.maxdd),
            fmt(self.mse_to_target),
            fmt(self.zeta),
        ]


def report_to_csv(reports: list[EvalReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(EVAL_CSV_COLUMNS)
    for r in reports:
        writer.writerow(r.csv_row())
    return buf.getvalue()


def reports_from_csv(text: str) -> list[EvalReport]:
    reader = csv.DictReader(io.StringIO(text))
    out = []
    for row in reader:
        out.append(
            EvalReport(
                label=row["label"],
                n_trials=int(row["n_trials"]),
                cr=float(row["cr"]),
                var=float(row["var"]),
                rr=float(row["rr"]),
                maxdd=float(row["maxdd"]),
                mse_to_target=float(row["mse_zeta"]) if row["mse_zeta"] else None,
                zeta=float(row["zeta"]) if row["zeta"] else None,
                degenerate_var=float(row["var"]) == 0.0,
            )
        )
    return out


def max_drawdown(returns) -> float:
    """Signed maximum drawdown (<= 0) of a per-period simple return series.

    Wealth is compounded as W_t = prod(1 + y); the result is the worst
    W_t / running_peak - 1. Returns at or below -1 are outside the domain.
    """
    y = np.asarray(returns, dtype=np.float64)
    if y.size == 0:
        return 0.0
    if np.any(y <= -1.0):
        raise ValueError("max_drawdown requires all returns > -1")
    wealth = np.cumprod(1.0 + y)
    peaks = np.maximum.accumulate(wealth)
    return float(min(0.0, np.min(wealth / peaks - 1.0)))


def mse_to_target(returns, zeta: float) -> float:
    """Mean of (zeta - R_k)^2 over per-trial cumulative rewards."""
    r = np.asarray(returns, dtype=np.float64)
    if r.size == 0:
        raise ValueError("mse_to_target of an empty sample")
    return float(np.mean((zeta - r) ** 2))


def evaluate(
    policy,
    env: EnvContract,
    n_trials: int,
    rng: RngStream,
    *,
    annualization: float = MONTHLY_ANNUALIZATION,
    zeta: float | None = None,
    discount: float = 1.0,
    label: str = "",
    keep_returns: bool = False,
) -> EvalReport:
    """Roll out ``n_trials`` episodes (stream ``rng.derive(j)`` for trial j)
    and summarize them.

    Var uses divisor n. When Var is exactly 0 the ratio is reported as +inf
    and flagged. The drawdown is computed on the across-trial mean of the
    per-period reward series (episodes shorter than the longest contribute 0
    after termination); it is a diagnostic for wealth-style reward streams
    and NaN if that mean series leaves the > -1 domain.
    """
    if n_trials < 2:
        raise ValueError("evaluate needs n_trials >= 2")
    totals = np.empty(n_trials)
    period_sums: list[float] = []
    for j in range(n_trials):
        traj = rollout(env, policy, rng.derive(j), discount)
        totals[j] = cumulative_reward(traj)
        f = 1.0
        for i, st in enumerate(traj.steps):
            if i == len(period_sums):
                period_sums.append(0.0)
            period_sums[i] += f * st.reward
            f *= discount
    cr = float(np.mean(totals))
    var = float(np.var(totals))
    degenerate = var == 0.0
    if degenerate:
        rr = math.inf if cr >= 0 else -math.inf
    else:
        rr = annualization * cr / math.sqrt(var)
    mean_series = np.array(period_sums) / n_trials
    try:
        maxdd = max_drawdown(mean_series)
    except ValueError:
        maxdd = math.nan
    return EvalReport(
        label=label,
        n_trials=n_trials,
        cr=cr,
        var=var,
        rr=rr,
        maxdd=maxdd,
        mse_to_target=None if zeta is None else mse_to_target(totals, zeta),
        zeta=zeta,
        degenerate_var=degenerate,
        returns=totals if keep_returns else None,
    )


@dataclass
class FrontierPoint:
    """(Var, CR) point labelled by method and hyperparameter."""

    label: str
    var: float
    cr: float
    dominated: bool = False


def pareto_filter(points: list[FrontierPoint]) -> list[FrontierPoint]:
    """Flag dominated points: some other point has var' <= var and cr' >= cr
    with at least one strict. Ties on both coordinates never dominate each
    other. Returns new points in the input order."""
    out = [FrontierPoint(p.label, p.var, p.cr, False) for p in points]
    order = sorted(range(len(out)), key=lambda i: (out[i].var, -out[i].cr))
    best_cr_before = -math.inf  # over strictly smaller var
    i = 0
    while i < len(order):
        j = i
        group_var = out[order[i]].var
        group_best = -math.inf
        while j < len(order) and out[order[j]].var == group_var:
            group_best = max(group_best, out[order[j]].cr)
            j += 1
        for k in range(i, j):
            p = out[order[k]]
            p.dominated = best_cr_before >= p.cr or group_best > p.cr
        best_cr_before = max(best_cr_before, group_best)
        i = j
    return out
