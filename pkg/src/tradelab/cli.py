"""Command-line pipeline: ingest -> features -> simulate/train -> analyze -> report.

One JSON config file describes a run (data files, tickers, split, indicator/
environment/trainer settings, output directory, seed); command-line flags
override individual fields. Every command writes deterministic artifacts, so
re-running over unchanged inputs reproduces outputs byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .agents import (
    A2CConfig,
    BASELINE_POLICIES,
    a2c_train,
    load_checkpoint,
    make_baseline,
    save_checkpoint,
)
from .analytics import behavior_profile, compare_profiles, load_report, save_report, write_comparison_csv
from .env import EnvConfig, TradingEnv, Window, load_episode_log, run_episode, save_episode_log
from .errors import TradeLabError
from .indicators import IndicatorConfig, build_features, write_features_csv
from .marketdata import (
    align_panel,
    load_bars,
    load_panel,
    load_series,
    parse_timestamp,
    save_panel,
    write_panel_csv,
)
from .svgchart import render_bar_chart, render_line_chart

__all__ = ["RunConfig", "UnknownAgent", "main", "entrypoint"]

ALIGN_MODES = ("intersect", "forward-fill")


class UnknownAgent(TradeLabError):
    pass


@dataclass
class RunConfig:
    """Everything one run needs; flag overrides win over the config file."""

    data: dict = field(default_factory=dict)  # ticker -> OHLCV csv path
    aux: dict = field(default_factory=dict)  # name -> csv path
    tickers: list = field(default_factory=list)
    split: str | None = None  # ISO date; boundary bar falls on the test side
    align: str = "intersect"
    indicators: IndicatorConfig = field(default_factory=IndicatorConfig)
    env: EnvConfig = field(default_factory=EnvConfig)
    a2c: A2CConfig = field(default_factory=A2CConfig)
    out: str = "out"
    seed: int = 0

    def __post_init__(self):
        if self.align not in ALIGN_MODES:
            raise ValueError(f"align must be one of {ALIGN_MODES}, got {self.align!r}")
        if not self.tickers:
            self.tickers = sorted(self.data)
        missing = [t for t in self.tickers if t not in self.data]
        if missing:
            raise ValueError(f"tickers without a data path: {missing}")

    @classmethod
    def load(cls, path, overrides: dict) -> "RunConfig":
        """Read the JSON config (optional) and fold flag overrides on top."""
        raw: dict = {}
        if path is not None:
            config_path = Path(path)
            if not config_path.exists():
                raise FileNotFoundError(str(config_path))
            raw = json.loads(config_path.read_text())
            base = config_path.parent
            raw["data"] = {t: str(base / p) for t, p in raw.get("data", {}).items()}
            raw["aux"] = {name: str(base / p) for name, p in raw.get("aux", {}).items()}
        for key, value in overrides.items():
            if value is not None:
                raw[key] = value
        return cls(
            data=raw.get("data", {}),
            aux=raw.get("aux", {}),
            tickers=list(raw.get("tickers", [])),
            split=raw.get("split"),
            align=raw.get("align", "intersect"),
            indicators=IndicatorConfig.from_dict(raw.get("indicators", {})),
            env=EnvConfig.from_dict(raw.get("env", {})),
            a2c=A2CConfig.from_dict(raw.get("a2c", {})),
            out=str(raw.get("out", "out")),
            seed=int(raw.get("seed", 0)),
        )

    @property
    def out_dir(self) -> Path:
        path = Path(self.out)
        path.mkdir(parents=True, exist_ok=True)
        return path

    @property
    def panel_path(self) -> Path:
        return self.out_dir / "panel.bin"


def _load_cached_panel(cfg: RunConfig):
    if not cfg.panel_path.exists():
        raise TradeLabError(f"no cached panel at {cfg.panel_path}; run `ingest` first")
    return load_panel(cfg.panel_path)


def _build_features(cfg: RunConfig):
    return build_features(_load_cached_panel(cfg), cfg.indicators)


def _windows(cfg: RunConfig, features) -> dict:
    """Full/train/test windows over the feature panel's time axis."""
    t = features.timestamps.shape[0]
    windows = {"full": Window(features.warmup, t)}
    if cfg.split is not None:
        boundary = parse_timestamp(cfg.split)
        idx = int(np.searchsorted(features.timestamps, boundary, side="left"))
        if features.warmup + 1 < idx < t - 1:
            windows["train"] = Window(features.warmup, idx)
            windows["test"] = Window(idx, t)
        else:
            raise TradeLabError(
                f"split {cfg.split} leaves no usable train/test windows "
                f"(boundary index {idx}, warmup {features.warmup}, length {t})"
            )
    return windows


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_ingest(cfg: RunConfig) -> int:
    if not cfg.data:
        raise TradeLabError("no data files configured; supply --config with a data map")
    series = [load_bars(cfg.data[ticker], ticker=ticker) for ticker in cfg.tickers]
    aux_series = [load_series(path, name) for name, path in sorted(cfg.aux.items())]
    panel = align_panel(series, aux=aux_series, fill=cfg.align)
    save_panel(panel, cfg.panel_path)
    write_panel_csv(panel, cfg.out_dir / "panel.csv")
    print(f"panel: {panel.timestamps.shape[0]} rows x {len(panel.tickers)} tickers -> {cfg.panel_path}")
    return 0


def cmd_features(cfg: RunConfig) -> int:
    features = _build_features(cfg)
    out = cfg.out_dir / "features.csv"
    write_features_csv(features, out)
    print(f"features: warmup index {features.warmup}, {features.features.shape[0]} rows -> {out}")
    return 0


def _resolve_agent(cfg: RunConfig, name: str):
    if name in BASELINE_POLICIES:
        return make_baseline(name)
    candidate = Path(name)
    if candidate.exists():
        return load_checkpoint(candidate)
    raise UnknownAgent(
        f"unknown agent {name!r}; valid baselines: {', '.join(sorted(BASELINE_POLICIES))}, "
        "or pass a checkpoint path"
    )


def cmd_simulate(cfg: RunConfig, agent: str, window_name: str | None) -> int:
    features = _build_features(cfg)
    windows = _windows(cfg, features)
    if window_name is None:
        window_name = "test" if "test" in windows else "full"
    if window_name not in windows:
        raise TradeLabError(f"window {window_name!r} unavailable; choose from {sorted(windows)}")
    policy = _resolve_agent(cfg, agent)
    log = run_episode(policy, cfg.env, features, windows[window_name], seed=cfg.seed)
    out = cfg.out_dir / f"log_{log.agent_label}.csv"
    save_episode_log(log, out)
    print(
        f"{log.agent_label}: {log.n_timestamps - 1} steps on {window_name}, "
        f"final value {log.portfolio_value[-1]:.2f} -> {out}"
    )
    return 0


def cmd_train(cfg: RunConfig, timesteps: int | None) -> int:
    features = _build_features(cfg)
    windows = _windows(cfg, features)
    window = windows.get("train", windows["full"])
    a2c_cfg = cfg.a2c
    overrides = {}
    if timesteps is not None:
        overrides["total_timesteps"] = timesteps
    if cfg.seed != a2c_cfg.seed:
        overrides["seed"] = cfg.seed
    if overrides:
        a2c_cfg = A2CConfig.from_dict({**a2c_cfg.to_dict(), **overrides})

    policy, stats = a2c_train(a2c_cfg, lambda: TradingEnv(cfg.env, features, window))
    ckpt = cfg.out_dir / "a2c.ckpt"
    save_checkpoint(policy, ckpt)

    with (cfg.out_dir / "train_stats.csv").open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["update", "policy_loss", "value_loss", "entropy", "grad_norm"])
        rows = zip(stats.policy_losses, stats.value_losses, stats.entropies, stats.grad_norms)
        for k, (pl, vl, en, gn) in enumerate(rows):
            writer.writerow([k, repr(pl), repr(vl), repr(en), repr(gn)])
    with (cfg.out_dir / "episode_rewards.csv").open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["episode", "reward"])
        for k, reward in enumerate(stats.episode_rewards):
            writer.writerow([k, repr(reward)])

    print(
        f"trained {stats.total_timesteps} timesteps: {stats.episodes} episodes "
        f"of {stats.episode_steps} steps, {stats.updates} updates -> {ckpt}"
    )
    return 0


def cmd_analyze(cfg: RunConfig, log_paths: list) -> int:
    logs = [load_episode_log(path) for path in log_paths]
    reports = [behavior_profile(log) for log in logs]
    for report in reports:
        target = cfg.out_dir / f"report_{report.agent_label}"
        save_report(report, target)
        side = "trader" if report.is_trader else "holder"
        print(
            f"{report.agent_label}: trader_score={report.trader_score:.4f} "
            f"({side} by the 0.5 convention) -> {target}"
        )
    if len(reports) >= 2:
        table = compare_profiles(reports)
        out = cfg.out_dir / "comparison.csv"
        write_comparison_csv(table, out)
        print(f"comparison over {len(reports)} agents -> {out}")
    return 0


def cmd_report(cfg: RunConfig, report_dir: str) -> int:
    report = load_report(report_dir)
    target = Path(report_dir)
    t = report.timestamps.astype(np.float64)
    charts = {
        "cumulative_reward.svg": render_line_chart(
            [(report.agent_label, t[1:], report.cumulative_reward)],
            title=f"Cumulative reward: {report.agent_label}",
        ),
        "integral_holding.svg": render_bar_chart(
            [str(i) for i in range(report.integral_holding.shape[0])],
            report.integral_holding,
            title=f"Integral holding (share-steps): {report.agent_label}",
        ),
        "holdings.svg": render_line_chart(
            [
                (f"hold_{i}", t, report.holdings_matrix[:, i])
                for i in range(report.holdings_matrix.shape[1])
            ],
            title=f"Holdings over time: {report.agent_label}",
        ),
    }
    for name, svg in charts.items():
        (target / name).write_text(svg)
    print(f"rendered {len(charts)} charts -> {target}")
    return 0


# ---------------------------------------------------------------------------
# argument plumbing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tradelab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON run-config path")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--seed", type=int, help="run seed (overrides config)")
        p.add_argument("--tickers", help="comma-separated ticker subset (overrides config)")
        p.add_argument("--split", help="ISO date train/test boundary (overrides config)")

    common(sub.add_parser("ingest", help="validate and align raw OHLCV files into a panel cache"))
    common(sub.add_parser("features", help="compute indicator features over the cached panel"))

    p = sub.add_parser("simulate", help="roll one agent over a window and write its episode log")
    common(p)
    p.add_argument("--agent", required=True, help="baseline name or checkpoint path")
    p.add_argument("--window", choices=["full", "train", "test"], help="which window to simulate")

    p = sub.add_parser("train", help="train the actor-critic agent and write a checkpoint")
    common(p)
    p.add_argument("--timesteps", type=int, help="override total training timesteps")

    p = sub.add_parser("analyze", help="compute behavior reports for one or more logs")
    common(p)
    p.add_argument("logs", nargs="+", help="episode-log CSV paths")

    p = sub.add_parser("report", help="render SVG charts from a saved behavior report")
    common(p)
    p.add_argument("report_dir", help="directory holding report.json")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides = {
            "out": args.out,
            "seed": args.seed,
            "split": args.split,
            "tickers": None if args.tickers is None else args.tickers.split(","),
        }
        cfg = RunConfig.load(args.config, overrides)
        if args.command == "ingest":
            return cmd_ingest(cfg)
        if args.command == "features":
            return cmd_features(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.agent, args.window)
        if args.command == "train":
            return cmd_train(cfg, args.timesteps)
        if args.command == "analyze":
            return cmd_analyze(cfg, args.logs)
        if args.command == "report":
            return cmd_report(cfg, args.report_dir)
        raise AssertionError(f"unhandled command {args.command}")
    except (TradeLabError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())
