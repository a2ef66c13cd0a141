"""Behavioral analytics over episode logs.

Everything here is a pure function of an EpisodeLog: cumulative reward
(prefix sums of the logged value deltas, so the series is in account
currency), integral holding (time-summed share exposure), trade statistics
over position changes, purchase-diversity concentration, and a continuous
holder-vs-trader score. Trades are detected as holding changes, never from
the action sign — a clipped no-op action is not a trade.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import TradeLabError
from .marketdata import format_timestamp

__all__ = [
    "TradeStats",
    "DiversityStats",
    "BehaviorReport",
    "ProfileComparison",
    "EmptyLog",
    "LogTooShort",
    "WindowMismatch",
    "MalformedReport",
    "cumulative_reward",
    "integral_holding",
    "trade_stats",
    "diversity_stats",
    "behavior_profile",
    "compare_profiles",
    "save_report",
    "load_report",
    "write_comparison_csv",
    "TRADER_THRESHOLD",
]

# convention only: a score above this prints as "trader", below as "holder"
TRADER_THRESHOLD = 0.5

COMPARISON_METRICS = ("final_cumulative_reward", "trader_score", "hhi", "max_shares_held")

REPORT_MAGIC = "tradelab-report-v1"


class EmptyLog(TradeLabError):
    pass


class LogTooShort(TradeLabError):
    pass


class WindowMismatch(TradeLabError):
    pass


class MalformedReport(TradeLabError):
    pass


@dataclass(frozen=True)
class TradeStats:
    """Position-change statistics; the first three are per-ticker vectors."""

    trade_count: np.ndarray  # int64 (N,) steps with a holding change
    total_turnover: np.ndarray  # int64 (N,) sum of |delta shares|
    max_shares_held: np.ndarray  # int64 (N,)
    stationarity_fraction: float  # fraction of (step, ticker) pairs left unchanged
    mean_holding_run: float  # mean rows per maximal constant-holding segment

    def to_dict(self) -> dict:
        return {
            "trade_count": [int(v) for v in self.trade_count],
            "total_turnover": [int(v) for v in self.total_turnover],
            "max_shares_held": [int(v) for v in self.max_shares_held],
            "stationarity_fraction": self.stationarity_fraction,
            "mean_holding_run": self.mean_holding_run,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TradeStats":
        return cls(
            trade_count=np.array(data["trade_count"], dtype=np.int64),
            total_turnover=np.array(data["total_turnover"], dtype=np.int64),
            max_shares_held=np.array(data["max_shares_held"], dtype=np.int64),
            stationarity_fraction=float(data["stationarity_fraction"]),
            mean_holding_run=float(data["mean_holding_run"]),
        )


@dataclass(frozen=True)
class DiversityStats:
    """Concentration of integral holding; hhi/top1_share are None when the
    agent never held anything (the index is undefined at zero exposure)."""

    active_tickers: int
    hhi: float | None
    top1_share: float | None

    def to_dict(self) -> dict:
        return {"active_tickers": self.active_tickers, "hhi": self.hhi, "top1_share": self.top1_share}

    @classmethod
    def from_dict(cls, data: dict) -> "DiversityStats":
        hhi = data["hhi"]
        top1 = data["top1_share"]
        return cls(
            active_tickers=int(data["active_tickers"]),
            hhi=None if hhi is None else float(hhi),
            top1_share=None if top1 is None else float(top1),
        )


@dataclass(frozen=True)
class BehaviorReport:
    """Everything the analytics layer derives from one episode."""

    agent_label: str
    timestamps: np.ndarray  # int64 (T,)
    cumulative_reward: np.ndarray  # float64 (T-1,) running account-currency total
    integral_holding: np.ndarray  # int64 (N,) share-steps
    holdings_matrix: np.ndarray  # int64 (T, N)
    trade_stats: TradeStats
    diversity: DiversityStats
    trader_score: float  # 1 - stationarity_fraction

    @property
    def final_cumulative_reward(self) -> float:
        return float(self.cumulative_reward[-1])

    @property
    def is_trader(self) -> bool:
        return self.trader_score > TRADER_THRESHOLD


def _require_steps(log) -> int:
    t = int(np.shape(log.timestamps)[0])
    if t < 2:
        raise EmptyLog("log records no steps")
    return t


def cumulative_reward(log) -> np.ndarray:
    """Running total of the logged per-step value deltas (Σ_{k<=t} r_k).

    The deltas telescope, so the last element is exactly V_T - V_0.
    """
    _require_steps(log)
    return np.cumsum(np.asarray(log.rewards, dtype=np.float64))


def integral_holding(log, prices=None) -> np.ndarray:
    """Time-summed exposure per ticker, in share-steps: Σ_t holdings[t][i].

    Pass a (T, N) ``prices`` matrix to weight each row by price instead,
    giving currency-steps (Σ_t holdings[t][i] · prices[t][i]).
    """
    _require_steps(log)
    holdings = np.asarray(log.holdings, dtype=np.int64)
    if prices is None:
        return holdings.sum(axis=0)
    prices = np.asarray(prices, dtype=np.float64)
    if prices.shape != holdings.shape:
        raise ValueError(f"prices must be {holdings.shape}, got {prices.shape}")
    return (holdings * prices).sum(axis=0)


def trade_stats(log) -> TradeStats:
    t = int(np.shape(log.timestamps)[0])
    if t < 2:
        raise LogTooShort("trade statistics need at least two rows")
    holdings = np.asarray(log.holdings, dtype=np.int64)
    deltas = np.diff(holdings, axis=0)
    changed = deltas != 0
    trade_count = changed.sum(axis=0).astype(np.int64)
    # each change starts a new maximal constant run, so every ticker has
    # trade_count+1 runs covering all T rows; the mean follows in closed form
    n_runs = int(trade_count.sum()) + holdings.shape[1]
    return TradeStats(
        trade_count=trade_count,
        total_turnover=np.abs(deltas).sum(axis=0).astype(np.int64),
        max_shares_held=holdings.max(axis=0).astype(np.int64),
        stationarity_fraction=float((~changed).mean()),
        mean_holding_run=holdings.size / n_runs,
    )


def diversity_stats(log) -> DiversityStats:
    held = integral_holding(log)
    total = int(held.sum())
    active = int(np.count_nonzero(held))
    if total == 0:
        return DiversityStats(active_tickers=active, hhi=None, top1_share=None)
    shares = held / total
    return DiversityStats(
        active_tickers=active,
        hhi=float((shares**2).sum()),
        top1_share=float(shares.max()),
    )


def behavior_profile(log) -> BehaviorReport:
    """Assemble every analytic for one log."""
    stats = trade_stats(log)
    return BehaviorReport(
        agent_label=log.agent_label,
        timestamps=np.asarray(log.timestamps, dtype=np.int64).copy(),
        cumulative_reward=cumulative_reward(log),
        integral_holding=integral_holding(log),
        holdings_matrix=np.asarray(log.holdings, dtype=np.int64).copy(),
        trade_stats=stats,
        diversity=diversity_stats(log),
        trader_score=1.0 - stats.stationarity_fraction,
    )


@dataclass(frozen=True)
class ProfileComparison:
    """Side-by-side metric table over reports that share a window.

    ``rankings`` maps each metric to labels ordered best (largest) first;
    reports without a defined hhi rank last there.
    """

    labels: tuple
    final_cumulative_reward: tuple
    trader_score: tuple
    hhi: tuple
    max_shares_held: tuple
    rankings: dict = field(default_factory=dict)

    def row(self, label: str) -> dict:
        i = self.labels.index(label)
        return {metric: getattr(self, metric)[i] for metric in COMPARISON_METRICS}


def compare_profiles(reports) -> ProfileComparison:
    reports = list(reports)
    if len(reports) < 2:
        raise ValueError("comparison needs at least two reports")
    base = reports[0].timestamps
    for report in reports[1:]:
        if not np.array_equal(report.timestamps, base):
            raise WindowMismatch(
                f"report {report.agent_label!r} covers a different window than {reports[0].agent_label!r}"
            )
    labels = tuple(r.agent_label for r in reports)
    table = {
        "final_cumulative_reward": tuple(r.final_cumulative_reward for r in reports),
        "trader_score": tuple(r.trader_score for r in reports),
        "hhi": tuple(r.diversity.hhi for r in reports),
        "max_shares_held": tuple(int(r.trade_stats.max_shares_held.max()) for r in reports),
    }
    rankings = {}
    for metric, values in table.items():
        order = sorted(
            range(len(reports)),
            key=lambda i: (values[i] is None, -(values[i] if values[i] is not None else 0.0), i),
        )
        rankings[metric] = [labels[i] for i in order]
    return ProfileComparison(labels=labels, rankings=rankings, **table)


# ---------------------------------------------------------------------------
# persistence: one JSON document of record plus flat CSVs for plotting
# ---------------------------------------------------------------------------

def save_report(report: BehaviorReport, directory) -> None:
    """Write report.json plus cumulative_reward/integral_holding/
    holdings_matrix CSVs under the given directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    doc = {
        "format": REPORT_MAGIC,
        "agent_label": report.agent_label,
        "timestamps": [int(v) for v in report.timestamps],
        "cumulative_reward": [float(v) for v in report.cumulative_reward],
        "integral_holding": [int(v) for v in report.integral_holding],
        "holdings_matrix": [[int(v) for v in row] for row in report.holdings_matrix],
        "trade_stats": report.trade_stats.to_dict(),
        "diversity": report.diversity.to_dict(),
        "trader_score": report.trader_score,
    }
    (directory / "report.json").write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")

    with (directory / "cumulative_reward.csv").open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["t", "timestamp", "cumulative_reward"])
        for k, value in enumerate(report.cumulative_reward):
            writer.writerow([k + 1, format_timestamp(report.timestamps[k + 1]), repr(float(value))])

    with (directory / "integral_holding.csv").open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["ticker", "integral_holding"])
        for i, value in enumerate(report.integral_holding):
            writer.writerow([i, int(value)])

    n = report.holdings_matrix.shape[1]
    with (directory / "holdings_matrix.csv").open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["t", "timestamp"] + [f"hold_{i}" for i in range(n)])
        for t in range(report.holdings_matrix.shape[0]):
            writer.writerow(
                [t, format_timestamp(report.timestamps[t])]
                + [int(v) for v in report.holdings_matrix[t]]
            )


def load_report(directory) -> BehaviorReport:
    """Rebuild a report from its JSON document of record."""
    path = Path(directory) / "report.json"
    if not path.exists():
        raise FileNotFoundError(str(path))
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise MalformedReport(f"unparsable report JSON: {path}: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != REPORT_MAGIC:
        raise MalformedReport(f"not a behavior report: {path}")
    try:
        return BehaviorReport(
            agent_label=doc["agent_label"],
            timestamps=np.array(doc["timestamps"], dtype=np.int64),
            cumulative_reward=np.array(doc["cumulative_reward"], dtype=np.float64),
            integral_holding=np.array(doc["integral_holding"], dtype=np.int64),
            holdings_matrix=np.array(doc["holdings_matrix"], dtype=np.int64),
            trade_stats=TradeStats.from_dict(doc["trade_stats"]),
            diversity=DiversityStats.from_dict(doc["diversity"]),
            trader_score=float(doc["trader_score"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedReport(f"report fields missing or malformed: {path}: {exc}") from None


def write_comparison_csv(comparison: ProfileComparison, path) -> None:
    """Flat `agent,<metrics...>` table; hhi prints empty when undefined."""
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["agent"] + list(COMPARISON_METRICS))
        for label in comparison.labels:
            row = comparison.row(label)
            writer.writerow(
                [label]
                + [
                    ""
                    if row[metric] is None
                    else (repr(float(row[metric])) if isinstance(row[metric], float) else row[metric])
                    for metric in COMPARISON_METRICS
                ]
            )
