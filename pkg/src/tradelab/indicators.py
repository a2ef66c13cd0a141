"""Technical-indicator suite and assembly of the per-ticker 8-feature block.

Every indicator returns ``(values, defined)`` where ``values`` is float64 with
NaN outside the defined region and ``defined`` is a boolean mask over the time
axis. Masks are explicit; downstream code must never rely on sentinel values.

Window conventions differ by indicator and are part of the contract:
``sma`` is strictly trailing (the window ends one bar BEFORE the current
index), while Bollinger and CCI windows include the current bar.

Operations accept a 1-D series ``(T,)`` or a 2-D batch ``(T, M)`` of
independent columns; the mask depends only on T, never on the data.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import TradeLabError
from .marketdata import MarketPanel, format_timestamp

__all__ = [
    "FEATURE_NAMES",
    "IndicatorConfig",
    "FeaturePanel",
    "IndicatorError",
    "WindowTooLarge",
    "SingularCovariance",
    "InsufficientHistory",
    "sma",
    "ema",
    "macd",
    "macd_signal",
    "bollinger",
    "rsi",
    "cci",
    "dx",
    "turbulence",
    "build_features",
    "write_features_csv",
]

# Fixed feature order; the state encoding depends on it.
FEATURE_NAMES = ("macd", "boll_ub", "boll_lb", "rsi", "cci", "dx", "sma_short", "sma_long")


class IndicatorError(TradeLabError):
    pass


class WindowTooLarge(IndicatorError):
    pass


class SingularCovariance(IndicatorError):
    pass


class InsufficientHistory(IndicatorError):
    pass


@dataclass(frozen=True)
class IndicatorConfig:
    """Window lengths and parameters for the 8-feature block plus turbulence.

    ``turb_window`` may be None to skip the turbulence series entirely.
    """

    rsi_period: int = 30
    cci_period: int = 30
    dx_period: int = 30
    sma_short: int = 30
    sma_long: int = 60
    macd_fast: int = 12
    macd_slow: int = 26
    macd_signal: int = 9
    boll_period: int = 20
    boll_k: float = 2.0
    turb_window: int | None = 252

    def __post_init__(self):
        periods = {
            "rsi_period": self.rsi_period,
            "cci_period": self.cci_period,
            "dx_period": self.dx_period,
            "sma_short": self.sma_short,
            "sma_long": self.sma_long,
            "macd_fast": self.macd_fast,
            "macd_slow": self.macd_slow,
            "macd_signal": self.macd_signal,
            "boll_period": self.boll_period,
        }
        for name, value in periods.items():
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be an integer >= 1, got {value!r}")
        if self.macd_fast >= self.macd_slow:
            raise ValueError("macd_fast must be smaller than macd_slow")
        if self.boll_k < 0:
            raise ValueError("boll_k must be non-negative")
        if self.turb_window is not None and self.turb_window < 2:
            raise ValueError("turb_window must be >= 2 or None")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "IndicatorConfig":
        return cls(**data)


# ---------------------------------------------------------------------------
# shape plumbing
# ---------------------------------------------------------------------------

def _as_columns(x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        return arr[:, None], True
    if arr.ndim == 2:
        return arr, False
    raise ValueError(f"expected a (T,) or (T, M) array, got shape {arr.shape}")


def _restore(values: np.ndarray, squeeze: bool) -> np.ndarray:
    return values[:, 0] if squeeze else values


def _blank(shape) -> np.ndarray:
    return np.full(shape, np.nan)


def _check_window(n: int, t: int, first_defined: int, name: str) -> None:
    if n < 1:
        raise ValueError(f"{name} window must be >= 1, got {n}")
    if first_defined >= t:
        raise WindowTooLarge(f"{name} window {n} leaves no defined index in a series of length {t}")


# ---------------------------------------------------------------------------
# moving averages
# ---------------------------------------------------------------------------

def sma(closes, n: int):
    """Strictly trailing n-bar mean: out[i] = mean(closes[i-n .. i-1]), i >= n."""
    x, squeeze = _as_columns(closes)
    t = x.shape[0]
    _check_window(n, t, n, "sma")
    out = _blank(x.shape)
    windows = sliding_window_view(x, n, axis=0)  # window s covers s .. s+n-1
    out[n:] = windows[: t - n].mean(axis=-1)
    defined = np.arange(t) >= n
    return _restore(out, squeeze), defined


def ema(closes, n: int):
    """SMA-seeded exponential mean, alpha = 2/(n+1), defined from index n-1."""
    x, squeeze = _as_columns(closes)
    t = x.shape[0]
    _check_window(n, t, n - 1, "ema")
    out = _blank(x.shape)
    alpha = 2.0 / (n + 1)
    out[n - 1] = x[:n].mean(axis=0)
    for i in range(n, t):
        out[i] = alpha * x[i] + (1.0 - alpha) * out[i - 1]
    defined = np.arange(t) >= n - 1
    return _restore(out, squeeze), defined


def macd(closes, cfg: IndicatorConfig = IndicatorConfig()):
    """EMA(fast) - EMA(slow); defined where the slow EMA is."""
    fast, d_fast = ema(closes, cfg.macd_fast)
    slow, d_slow = ema(closes, cfg.macd_slow)
    return fast - slow, d_fast & d_slow


def macd_signal(closes, cfg: IndicatorConfig = IndicatorConfig()):
    """Signal line: EMA of the MACD line over the defined region."""
    line, d_line = macd(closes, cfg)
    x, squeeze = _as_columns(line)
    start = int(np.argmax(d_line))
    sig_defined_region, d_inner = ema(x[start:], cfg.macd_signal)
    out = _blank(x.shape)
    out[start:] = sig_defined_region
    defined = np.zeros(x.shape[0], dtype=bool)
    defined[start:] = d_inner
    return _restore(out, squeeze), defined


def bollinger(closes, cfg: IndicatorConfig = IndicatorConfig()):
    """Bands mid +- k*sigma over a window INCLUDING the current bar.

    sigma is the population standard deviation. Returns (ub, lb, defined).
    """
    x, squeeze = _as_columns(closes)
    t = x.shape[0]
    n = cfg.boll_period
    _check_window(n, t, n - 1, "bollinger")
    windows = sliding_window_view(x, n, axis=0)  # ends at index s+n-1
    mid = windows.mean(axis=-1)
    # two-pass variance; a cumsum-of-squares shortcut cancels catastrophically
    sigma = np.sqrt(((windows - mid[..., None]) ** 2).mean(axis=-1))
    ub = _blank(x.shape)
    lb = _blank(x.shape)
    ub[n - 1 :] = mid + cfg.boll_k * sigma
    lb[n - 1 :] = mid - cfg.boll_k * sigma
    defined = np.arange(t) >= n - 1
    return _restore(ub, squeeze), _restore(lb, squeeze), defined


# ---------------------------------------------------------------------------
# oscillators
# ---------------------------------------------------------------------------

def rsi(closes, n: int):
    """Relative strength over the last n close-to-close moves, in [0, 100].

    Degenerate windows follow the standard conventions: all-gain 100,
    all-loss 0, flat 50.
    """
    x, squeeze = _as_columns(closes)
    t = x.shape[0]
    _check_window(n, t, n, "rsi")
    diffs = np.diff(x, axis=0)
    gains = np.where(diffs > 0, diffs, 0.0)
    losses = np.where(diffs < 0, -diffs, 0.0)
    avg_gain = sliding_window_view(gains, n, axis=0).mean(axis=-1)
    avg_loss = sliding_window_view(losses, n, axis=0).mean(axis=-1)
    denom = avg_gain + avg_loss
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(denom > 0, avg_gain / np.where(denom > 0, denom, 1.0), 0.5)
    out = _blank(x.shape)
    out[n:] = 100.0 * ratio
    defined = np.arange(t) >= n
    return _restore(out, squeeze), defined


def cci(high, low, close, n: int):
    """Commodity channel index with the window including the current bar.

    A zero mean deviation (flat window) maps to 0.
    """
    h, squeeze = _as_columns(high)
    l, _ = _as_columns(low)
    c, _ = _as_columns(close)
    t = h.shape[0]
    _check_window(n, t, n - 1, "cci")
    tp = (h + l + c) / 3.0
    windows = sliding_window_view(tp, n, axis=0)
    mean_tp = windows.mean(axis=-1)
    mean_dev = np.abs(windows - mean_tp[..., None]).mean(axis=-1)
    current = tp[n - 1 :]
    with np.errstate(invalid="ignore", divide="ignore"):
        raw = (current - mean_tp) / (0.015 * mean_dev)
    out = _blank(h.shape)
    out[n - 1 :] = np.where(mean_dev > 0, raw, 0.0)
    defined = np.arange(t) >= n - 1
    return _restore(out, squeeze), defined


def dx(high, low, close, n: int):
    """Directional movement index in [0, 100] with Wilder smoothing of period n.

    The smoothed sums start as the plain sum of the first n one-bar terms and
    then decay as S <- S*(1 - 1/n) + current. A zero +DI + -DI maps to 0.
    """
    h, squeeze = _as_columns(high)
    l, _ = _as_columns(low)
    c, _ = _as_columns(close)
    t = h.shape[0]
    _check_window(n, t, n, "dx")

    up = h[1:] - h[:-1]
    down = l[:-1] - l[1:]
    dm_plus = np.where((up > down) & (up > 0), up, 0.0)
    dm_minus = np.where((down > up) & (down > 0), down, 0.0)
    prev_close = c[:-1]
    tr = np.maximum(h[1:] - l[1:], np.maximum(np.abs(h[1:] - prev_close), np.abs(l[1:] - prev_close)))

    out = _blank(h.shape)
    s_plus = dm_plus[:n].sum(axis=0)
    s_minus = dm_minus[:n].sum(axis=0)
    s_tr = tr[:n].sum(axis=0)
    decay = 1.0 - 1.0 / n
    for k in range(n - 1, t - 1):  # term k belongs to bar index k+1
        if k >= n:
            s_plus = s_plus * decay + dm_plus[k]
            s_minus = s_minus * decay + dm_minus[k]
            s_tr = s_tr * decay + tr[k]
        with np.errstate(invalid="ignore", divide="ignore"):
            di_plus = np.where(s_tr > 0, 100.0 * s_plus / np.where(s_tr > 0, s_tr, 1.0), 0.0)
            di_minus = np.where(s_tr > 0, 100.0 * s_minus / np.where(s_tr > 0, s_tr, 1.0), 0.0)
        total = di_plus + di_minus
        # ratio first: |a-b|/(a+b) <= 1 exactly, so DX stays within [0, 100]
        ratio = np.abs(di_plus - di_minus) / np.where(total > 0, total, 1.0)
        out[k + 1] = np.where(total > 0, 100.0 * ratio, 0.0)
    defined = np.arange(t) >= n
    return _restore(out, squeeze), defined


# ---------------------------------------------------------------------------
# turbulence
# ---------------------------------------------------------------------------

def turbulence(panel: MarketPanel, window: int):
    """Mahalanobis distance of each return vector from its trailing window.

    d[t] = (r_t - mu) Sigma^-1 (r_t - mu)^T with mu/Sigma the mean and sample
    covariance of the `window` return vectors strictly before t. Undefined for
    t < window + 1. Sigma gets an eps*I bump when the Cholesky factorization
    fails; if it still fails the data is degenerate and SingularCovariance
    is raised.
    """
    n_tickers = panel.n_tickers
    t_len = panel.n_timestamps
    if window <= n_tickers:
        raise ValueError(f"turbulence window ({window}) must exceed the ticker count ({n_tickers})")
    if window + 1 >= t_len:
        raise WindowTooLarge(f"turbulence window {window} leaves no defined index in a panel of length {t_len}")

    closes = panel.close
    returns = closes[1:] / closes[:-1] - 1.0  # returns[k] belongs to t = k+1
    values = np.full(t_len, np.nan)
    for t in range(window + 1, t_len):
        trailing = returns[t - window - 1 : t - 1]
        mu = trailing.mean(axis=0)
        sigma = np.atleast_2d(np.cov(trailing, rowvar=False, ddof=1))
        dev = returns[t - 1] - mu
        chol = None
        for attempt in range(2):
            try:
                chol = np.linalg.cholesky(sigma)
                break
            except np.linalg.LinAlgError:
                if attempt == 0:
                    eps = 1e-8 * np.trace(sigma) / n_tickers
                    sigma = sigma + eps * np.eye(n_tickers)
        if chol is None:
            raise SingularCovariance(f"return covariance is singular at index {t} even after regularization")
        z = np.linalg.solve(chol, dev)
        values[t] = float(z @ z)
    defined = np.arange(t_len) >= window + 1
    return values, defined


# ---------------------------------------------------------------------------
# feature assembly
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FeaturePanel:
    """Per-timestamp, per-ticker indicator block plus market-wide series.

    ``features`` is (T, N, 8) in FEATURE_NAMES order; ``defined`` is (T, 8)
    because definedness depends only on elapsed history, not on the ticker.
    ``closes`` carries the aligned close matrix so a feature panel is a
    self-contained input for simulation. ``warmup`` is the first index where
    all 8 features are defined for every ticker.
    """

    timestamps: np.ndarray  # int64 (T,)
    tickers: tuple[str, ...]
    features: np.ndarray  # float64 (T, N, 8)
    defined: np.ndarray  # bool (T, 8)
    closes: np.ndarray  # float64 (T, N)
    warmup: int
    aux: dict[str, np.ndarray] = field(default_factory=dict)
    aux_defined: dict[str, np.ndarray] = field(default_factory=dict)
    config: IndicatorConfig = field(default_factory=IndicatorConfig)

    def __post_init__(self):
        t = np.asarray(self.timestamps, dtype=np.int64)
        t.setflags(write=False)
        object.__setattr__(self, "timestamps", t)
        object.__setattr__(self, "tickers", tuple(self.tickers))
        for name, dtype in (("features", np.float64), ("closes", np.float64), ("defined", bool)):
            arr = np.array(getattr(self, name), dtype=dtype)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        expected = (len(self.timestamps), len(self.tickers), len(FEATURE_NAMES))
        if self.features.shape != expected:
            raise ValueError(f"features shape {self.features.shape}, expected {expected}")
        if self.closes.shape != expected[:2]:
            raise ValueError(f"closes shape {self.closes.shape}, expected {expected[:2]}")
        if self.defined.shape != (expected[0], expected[2]):
            raise ValueError(f"defined shape {self.defined.shape}, expected {(expected[0], expected[2])}")

    @property
    def n_timestamps(self) -> int:
        return int(self.timestamps.shape[0])

    @property
    def n_tickers(self) -> int:
        return len(self.tickers)


def build_features(panel: MarketPanel, cfg: IndicatorConfig = IndicatorConfig()) -> FeaturePanel:
    """Compute the 8-feature block for every ticker, plus aux series.

    Raises InsufficientHistory when the panel is shorter than the longest
    configured warmup (including the turbulence window when enabled).
    """
    t_len, n = panel.close.shape
    features = np.empty((t_len, n, len(FEATURE_NAMES)))
    defined = None
    # per-ticker 1-D calls so each column is bit-identical to the standalone op
    for j in range(n):
        h, l, c = panel.high[:, j], panel.low[:, j], panel.close[:, j]
        try:
            macd_v, d_macd = macd(c, cfg)
            ub_v, lb_v, d_boll = bollinger(c, cfg)
            rsi_v, d_rsi = rsi(c, cfg.rsi_period)
            cci_v, d_cci = cci(h, l, c, cfg.cci_period)
            dx_v, d_dx = dx(h, l, c, cfg.dx_period)
            sma_s, d_s = sma(c, cfg.sma_short)
            sma_l, d_l = sma(c, cfg.sma_long)
        except WindowTooLarge as exc:
            raise InsufficientHistory(str(exc)) from None
        features[:, j, :] = np.stack([macd_v, ub_v, lb_v, rsi_v, cci_v, dx_v, sma_s, sma_l], axis=1)
        if defined is None:
            defined = np.stack([d_macd, d_boll, d_boll, d_rsi, d_cci, d_dx, d_s, d_l], axis=1)

    all_defined = defined.all(axis=1)
    if not all_defined.any():
        raise InsufficientHistory(f"no index has all features defined (panel length {t_len})")
    warmup = int(np.argmax(all_defined))

    aux = {name: np.array(series) for name, series in panel.aux.items()}
    aux_defined = {name: np.ones(t_len, dtype=bool) for name in aux}
    if cfg.turb_window is not None:
        try:
            turb_v, turb_d = turbulence(panel, cfg.turb_window)
        except WindowTooLarge as exc:
            raise InsufficientHistory(str(exc)) from None
        aux["turbulence"] = turb_v
        aux_defined["turbulence"] = turb_d

    return FeaturePanel(
        timestamps=panel.timestamps,
        tickers=panel.tickers,
        features=features,
        defined=defined,
        closes=panel.close,
        warmup=warmup,
        aux=aux,
        aux_defined=aux_defined,
        config=cfg,
    )


def write_features_csv(fp: FeaturePanel, path) -> None:
    """Write the long-format feature CSV plus a `<path>.json` sidecar.

    The sidecar records the indicator config, warmup index, feature order,
    and ticker order. Undefined cells serialize as `nan`.
    """
    import csv

    path = Path(path)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["timestamp", "ticker", *FEATURE_NAMES])
        for t in range(fp.n_timestamps):
            stamp = format_timestamp(fp.timestamps[t])
            for j, ticker in enumerate(fp.tickers):
                writer.writerow([stamp, ticker, *[repr(float(v)) for v in fp.features[t, j]]])
    sidecar = {
        "config": fp.config.to_dict(),
        "warmup": fp.warmup,
        "feature_names": list(FEATURE_NAMES),
        "tickers": list(fp.tickers),
    }
    Path(str(path) + ".json").write_text(json.dumps(sidecar, sort_keys=True, indent=2) + "\n")
