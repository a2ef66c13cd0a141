"""Loading, validation, alignment, and splitting of hourly OHLCV bar data.

Timestamps are UTC epoch seconds internally; input parsing accepts ISO-8601
(a trailing ``Z`` or an explicit offset; naive values are taken as UTC) as
well as raw integer seconds. Loader errors carry the file path and the
1-based physical row number (the header is row 1).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import TradeLabError

__all__ = [
    "Bar",
    "BarSeries",
    "AuxSeries",
    "MarketPanel",
    "SplitSpec",
    "ColumnSchema",
    "MarketDataError",
    "SchemaMismatch",
    "InvalidBar",
    "DuplicateTimestamp",
    "EmptyIntersection",
    "UnfillableLeadingGap",
    "BoundaryOutOfRange",
    "parse_timestamp",
    "format_timestamp",
    "load_bars",
    "load_series",
    "align_panel",
    "split_panel",
    "save_panel",
    "load_panel",
    "write_panel_csv",
]

PANEL_MAGIC = "tradelab-panel-v1"


class MarketDataError(TradeLabError):
    """Base for data errors; carries optional file path and 1-based row."""

    def __init__(self, message: str, path=None, row: int | None = None):
        context = []
        if path is not None:
            context.append(str(path))
        if row is not None:
            context.append(f"row {row}")
        if context:
            message = f"{message} ({', '.join(context)})"
        super().__init__(message)
        self.path = None if path is None else str(path)
        self.row = row


class SchemaMismatch(MarketDataError):
    pass


class InvalidBar(MarketDataError):
    pass


class DuplicateTimestamp(MarketDataError):
    pass


class EmptyIntersection(MarketDataError):
    pass


class UnfillableLeadingGap(MarketDataError):
    pass


class BoundaryOutOfRange(MarketDataError):
    pass


def parse_timestamp(text: str) -> int:
    """Parse an ISO-8601 timestamp (or integer epoch seconds) to UTC epoch seconds."""
    raw = text.strip()
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        stamp = datetime.fromisoformat(raw.replace("Z", "+00:00"))
    except ValueError as exc:
        raise ValueError(f"unparsable timestamp {text!r}") from exc
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    return int(stamp.timestamp())


def format_timestamp(ts: int) -> str:
    return datetime.fromtimestamp(int(ts), tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class Bar:
    """One OHLCV bar. ``problem()`` returns None when all invariants hold."""

    timestamp: int
    open: float
    high: float
    low: float
    close: float
    volume: float

    def problem(self) -> str | None:
        values = (self.open, self.high, self.low, self.close, self.volume)
        if not all(np.isfinite(v) for v in values):
            return "non-finite field"
        if min(self.open, self.high, self.low, self.close) <= 0:
            return "non-positive price"
        if self.volume < 0:
            return "negative volume"
        if self.low > self.high:
            return f"low {self.low} above high {self.high}"
        if not (self.low <= self.open <= self.high):
            return f"open {self.open} outside [low, high]"
        if not (self.low <= self.close <= self.high):
            return f"close {self.close} outside [low, high]"
        return None


def _readonly(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class BarSeries:
    """Validated per-ticker bar history with strictly increasing timestamps."""

    ticker: str
    timestamps: np.ndarray  # int64 (T,)
    open: np.ndarray  # float64 (T,)
    high: np.ndarray
    low: np.ndarray
    close: np.ndarray
    volume: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "timestamps", _readonly(np.asarray(self.timestamps, dtype=np.int64)))
        for name in ("open", "high", "low", "close", "volume"):
            object.__setattr__(self, name, _readonly(np.asarray(getattr(self, name), dtype=np.float64)))
        n = self.timestamps.shape[0]
        for name in ("open", "high", "low", "close", "volume"):
            if getattr(self, name).shape != (n,):
                raise ValueError(f"{self.ticker}: field {name} length mismatch")
        if n == 0:
            raise InvalidBar("series contains no bars", path=None)
        if np.any(np.diff(self.timestamps) <= 0):
            bad = int(np.argmax(np.diff(self.timestamps) <= 0)) + 1
            raise InvalidBar(f"{self.ticker}: timestamps not strictly increasing at index {bad}")
        problems = _bar_problems(self.open, self.high, self.low, self.close, self.volume)
        if problems is not None:
            idx, why = problems
            raise InvalidBar(f"{self.ticker}: {why} at index {idx}")

    def __len__(self) -> int:
        return int(self.timestamps.shape[0])

    def bar(self, i: int) -> Bar:
        return Bar(
            int(self.timestamps[i]),
            float(self.open[i]),
            float(self.high[i]),
            float(self.low[i]),
            float(self.close[i]),
            float(self.volume[i]),
        )

    @classmethod
    def from_bars(cls, ticker: str, bars) -> "BarSeries":
        bars = list(bars)
        return cls(
            ticker=ticker,
            timestamps=np.array([b.timestamp for b in bars], dtype=np.int64),
            open=np.array([b.open for b in bars]),
            high=np.array([b.high for b in bars]),
            low=np.array([b.low for b in bars]),
            close=np.array([b.close for b in bars]),
            volume=np.array([b.volume for b in bars]),
        )


def _bar_problems(o, h, l, c, v):
    """First violated bar invariant as (index, reason), or None."""
    finite = np.isfinite(o) & np.isfinite(h) & np.isfinite(l) & np.isfinite(c) & np.isfinite(v)
    ok = (
        finite
        & (o > 0) & (h > 0) & (l > 0) & (c > 0) & (v >= 0)
        & (l <= h) & (l <= o) & (o <= h) & (l <= c) & (c <= h)
    )
    if ok.all():
        return None
    idx = int(np.argmin(ok))
    return idx, Bar(0, float(o[idx]), float(h[idx]), float(l[idx]), float(c[idx]), float(v[idx])).problem()


@dataclass(frozen=True)
class AuxSeries:
    """Market-wide scalar series (e.g. VIX) on its own timestamp axis."""

    name: str
    timestamps: np.ndarray  # int64 (T,)
    values: np.ndarray  # float64 (T,)

    def __post_init__(self):
        object.__setattr__(self, "timestamps", _readonly(np.asarray(self.timestamps, dtype=np.int64)))
        object.__setattr__(self, "values", _readonly(np.asarray(self.values, dtype=np.float64)))
        if self.timestamps.shape != self.values.shape:
            raise ValueError(f"{self.name}: timestamp/value length mismatch")

    def __len__(self) -> int:
        return int(self.timestamps.shape[0])


@dataclass(frozen=True)
class MarketPanel:
    """Time-aligned OHLCV matrices over a fixed ticker order, plus aux series.

    Every matrix is (T, N); ticker order is fixed and used by all downstream
    consumers. Arrays are read-only, so a panel is safe to share across
    concurrent readers.
    """

    tickers: tuple[str, ...]
    timestamps: np.ndarray  # int64 (T,)
    open: np.ndarray  # float64 (T, N)
    high: np.ndarray
    low: np.ndarray
    close: np.ndarray
    volume: np.ndarray
    aux: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "tickers", tuple(self.tickers))
        object.__setattr__(self, "timestamps", _readonly(np.asarray(self.timestamps, dtype=np.int64)))
        shape = (self.timestamps.shape[0], len(self.tickers))
        for name in ("open", "high", "low", "close", "volume"):
            arr = _readonly(np.asarray(getattr(self, name), dtype=np.float64))
            if arr.shape != shape:
                raise ValueError(f"panel field {name} has shape {arr.shape}, expected {shape}")
            object.__setattr__(self, name, arr)
        aux = {}
        for name, values in self.aux.items():
            arr = _readonly(np.asarray(values, dtype=np.float64))
            if arr.shape != (shape[0],):
                raise ValueError(f"aux series {name!r} has shape {arr.shape}, expected ({shape[0]},)")
            aux[name] = arr
        object.__setattr__(self, "aux", aux)

    @property
    def n_timestamps(self) -> int:
        return int(self.timestamps.shape[0])

    @property
    def n_tickers(self) -> int:
        return len(self.tickers)

    def slice(self, start: int, stop: int) -> "MarketPanel":
        return MarketPanel(
            tickers=self.tickers,
            timestamps=self.timestamps[start:stop],
            open=self.open[start:stop],
            high=self.high[start:stop],
            low=self.low[start:stop],
            close=self.close[start:stop],
            volume=self.volume[start:stop],
            aux={name: values[start:stop] for name, values in self.aux.items()},
        )


@dataclass(frozen=True)
class SplitSpec:
    """Half-open train/test partition of a panel's time range at ``boundary``."""

    boundary: int
    train: tuple[int, int]  # [start, boundary) as epoch seconds
    test: tuple[int, int]  # [boundary, end]

    def __post_init__(self):
        if not (self.train[0] < self.boundary <= self.test[0] <= self.test[1]):
            raise ValueError("train must precede test and both must be non-empty")


@dataclass(frozen=True)
class ColumnSchema:
    """Column mapping for bar CSVs; ``ticker`` selects long-format files."""

    timestamp: str = "timestamp"
    open: str = "open"
    high: str = "high"
    low: str = "low"
    close: str = "close"
    volume: str = "volume"
    ticker: str | None = None


DEFAULT_SCHEMA = ColumnSchema()


def _open_csv(path) -> tuple[list[str], list[list[str]]]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    with path.open(newline="") as handle:
        rows = list(csv.reader(handle))
    if not rows:
        raise SchemaMismatch("file is empty, expected a header row", path=path, row=1)
    return rows[0], rows[1:]


def _column_indices(header: list[str], wanted: dict[str, str], path) -> dict[str, int]:
    indices = {}
    for key, column in wanted.items():
        try:
            indices[key] = header.index(column)
        except ValueError:
            raise SchemaMismatch(f"missing column {column!r}", path=path, row=1) from None
    return indices


def load_bars(path, schema: ColumnSchema = DEFAULT_SCHEMA, ticker: str | None = None) -> BarSeries:
    """Load one ticker's bars from a CSV file.

    With ``schema.ticker`` set the file is long-format and ``ticker`` selects
    the rows to keep; otherwise the whole file is one ticker and ``ticker``
    defaults to the file stem. Rows violating bar invariants or ordering are
    rejected with their 1-based row number.
    """
    path = Path(path)
    header, rows = _open_csv(path)
    wanted = {
        "timestamp": schema.timestamp,
        "open": schema.open,
        "high": schema.high,
        "low": schema.low,
        "close": schema.close,
        "volume": schema.volume,
    }
    if schema.ticker is not None:
        if ticker is None:
            raise ValueError("long-format schema requires an explicit ticker")
        wanted["ticker"] = schema.ticker
    col = _column_indices(header, wanted, path)
    name = ticker if ticker is not None else path.stem

    bars: list[Bar] = []
    for offset, row in enumerate(rows):
        row_no = offset + 2  # header is row 1
        if schema.ticker is not None and row[col["ticker"]] != name:
            continue
        try:
            bar = Bar(
                timestamp=parse_timestamp(row[col["timestamp"]]),
                open=float(row[col["open"]]),
                high=float(row[col["high"]]),
                low=float(row[col["low"]]),
                close=float(row[col["close"]]),
                volume=float(row[col["volume"]]),
            )
        except (ValueError, IndexError) as exc:
            raise InvalidBar(f"unparsable field: {exc}", path=path, row=row_no) from None
        why = bar.problem()
        if why is not None:
            raise InvalidBar(why, path=path, row=row_no)
        if bars and bar.timestamp <= bars[-1].timestamp:
            raise InvalidBar("timestamp not strictly increasing", path=path, row=row_no)
        bars.append(bar)
    if not bars:
        raise InvalidBar(f"no usable rows for ticker {name!r}", path=path)
    return BarSeries.from_bars(name, bars)


def load_series(path, name: str) -> AuxSeries:
    """Load a two-column (timestamp, value) market-wide series, e.g. VIX.

    Rows are sorted by timestamp; duplicate timestamps are rejected.
    """
    path = Path(path)
    header, rows = _open_csv(path)
    col = _column_indices(header, {"timestamp": "timestamp", "value": "value"}, path)
    parsed: list[tuple[int, float, int]] = []
    for offset, row in enumerate(rows):
        row_no = offset + 2
        try:
            parsed.append((parse_timestamp(row[col["timestamp"]]), float(row[col["value"]]), row_no))
        except (ValueError, IndexError) as exc:
            raise MarketDataError(f"unparsable field: {exc}", path=path, row=row_no) from None
    parsed.sort(key=lambda item: item[0])
    for prev, cur in zip(parsed, parsed[1:]):
        if cur[0] == prev[0]:
            raise DuplicateTimestamp(f"duplicate timestamp {format_timestamp(cur[0])}", path=path, row=cur[2])
    return AuxSeries(
        name=name,
        timestamps=np.array([p[0] for p in parsed], dtype=np.int64),
        values=np.array([p[1] for p in parsed]),
    )


def align_panel(series, aux=(), fill: str = "forward-fill") -> MarketPanel:
    """Align bar series (and aux series) onto one shared timestamp axis.

    ``intersect`` keeps only timestamps present in every input. ``forward-fill``
    takes the union, starts the panel at the latest first-observation among
    inputs (dropping unfillable leading gaps), and fills interior/trailing gaps
    with a flat bar at the most recent prior close (volume 0); aux gaps carry
    the prior value forward.
    """
    series = list(series)
    aux = list(aux)
    if not series:
        raise ValueError("align_panel requires at least one BarSeries")
    if fill not in ("intersect", "forward-fill"):
        raise ValueError(f"unknown fill policy {fill!r}")
    tickers = [s.ticker for s in series]
    if len(set(tickers)) != len(tickers):
        raise ValueError("duplicate tickers in input series")

    axes = [s.timestamps for s in series] + [a.timestamps for a in aux]
    if fill == "intersect":
        timestamps = axes[0]
        for axis in axes[1:]:
            timestamps = np.intersect1d(timestamps, axis, assume_unique=True)
        if timestamps.size == 0:
            raise EmptyIntersection("no timestamp is common to all inputs")
    else:
        timestamps = axes[0]
        for axis in axes[1:]:
            timestamps = np.union1d(timestamps, axis)
        start = max(int(axis[0]) for axis in axes)
        timestamps = timestamps[timestamps >= start]
        if timestamps.size == 0:
            raise EmptyIntersection("no timestamps remain after dropping leading gaps")

    matrices = {name: np.empty((timestamps.size, len(series))) for name in ("open", "high", "low", "close", "volume")}
    for j, s in enumerate(series):
        idx = np.searchsorted(s.timestamps, timestamps, side="right") - 1
        if np.any(idx < 0):
            raise UnfillableLeadingGap(f"{s.ticker}: no observation at or before panel start")
        exact = s.timestamps[idx] == timestamps
        if fill == "intersect" and not exact.all():
            raise UnfillableLeadingGap(f"{s.ticker}: intersection produced a missing cell")
        last_close = s.close[idx]
        matrices["open"][:, j] = np.where(exact, s.open[idx], last_close)
        matrices["high"][:, j] = np.where(exact, s.high[idx], last_close)
        matrices["low"][:, j] = np.where(exact, s.low[idx], last_close)
        matrices["close"][:, j] = np.where(exact, s.close[idx], last_close)
        matrices["volume"][:, j] = np.where(exact, s.volume[idx], 0.0)

    aux_columns = {}
    for a in aux:
        idx = np.searchsorted(a.timestamps, timestamps, side="right") - 1
        if np.any(idx < 0):
            raise UnfillableLeadingGap(f"aux {a.name!r}: no observation at or before panel start")
        aux_columns[a.name] = a.values[idx]

    return MarketPanel(tickers=tuple(tickers), timestamps=timestamps, aux=aux_columns, **matrices)


def split_panel(panel: MarketPanel, boundary: int) -> tuple[MarketPanel, MarketPanel]:
    """Partition a panel at ``boundary``: train holds t < boundary, test t >= boundary.

    The boundary bar belongs to the test split. Raises BoundaryOutOfRange when
    either side would be empty.
    """
    cut = int(np.searchsorted(panel.timestamps, int(boundary), side="left"))
    if cut == 0 or cut == panel.n_timestamps:
        raise BoundaryOutOfRange(
                f"boundary {format_timestamp(boundary)} not strictly inside "
                f"[{format_timestamp(panel.timestamps[0])}, {format_timestamp(panel.timestamps[-1])}]"
        )
    return panel.slice(0, cut), panel.slice(cut, panel.n_timestamps)


# ---------------------------------------------------------------------------
# Cache serialization: one JSON header line + little-endian float64/int64 payload.
# Content-addressed by value only, so identical inputs yield identical bytes.
# ---------------------------------------------------------------------------

def save_panel(panel: MarketPanel, path) -> None:
    import json

    header = {
        "format": PANEL_MAGIC,
        "tickers": list(panel.tickers),
        "aux": sorted(panel.aux),
        "n_timestamps": panel.n_timestamps,
    }
    blob = bytearray()
    blob.extend(json.dumps(header, sort_keys=True).encode())
    blob.extend(b"\n")
    blob.extend(panel.timestamps.astype("<i8").tobytes())
    for name in ("open", "high", "low", "close", "volume"):
        blob.extend(getattr(panel, name).astype("<f8").tobytes())
    for name in sorted(panel.aux):
        blob.extend(panel.aux[name].astype("<f8").tobytes())
    Path(path).write_bytes(bytes(blob))


def load_panel(path) -> MarketPanel:
    import json

    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    raw = path.read_bytes()
    newline = raw.index(b"\n")
    header = json.loads(raw[:newline].decode())
    if header.get("format") != PANEL_MAGIC:
        raise MarketDataError(f"not a panel cache: {path}", path=path)
    t = int(header["n_timestamps"])
    n = len(header["tickers"])
    offset = newline + 1
    timestamps = np.frombuffer(raw, dtype="<i8", count=t, offset=offset).astype(np.int64)
    offset += t * 8
    matrices = {}
    for name in ("open", "high", "low", "close", "volume"):
        matrices[name] = np.frombuffer(raw, dtype="<f8", count=t * n, offset=offset).reshape(t, n)
        offset += t * n * 8
    aux = {}
    for name in header["aux"]:
        aux[name] = np.frombuffer(raw, dtype="<f8", count=t, offset=offset)
        offset += t * 8
    return MarketPanel(tickers=tuple(header["tickers"]), timestamps=timestamps, aux=aux, **matrices)


def write_panel_csv(panel: MarketPanel, path) -> None:
    """Long-format mirror of the cache: timestamp,ticker,open,high,low,close,volume."""
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["timestamp", "ticker", "open", "high", "low", "close", "volume"])
        for t in range(panel.n_timestamps):
            stamp = format_timestamp(panel.timestamps[t])
            for j, ticker in enumerate(panel.tickers):
                writer.writerow([
                    stamp,
                    ticker,
                    repr(float(panel.open[t, j])),
                    repr(float(panel.high[t, j])),
                    repr(float(panel.low[t, j])),
                    repr(float(panel.close[t, j])),
                    repr(float(panel.volume[t, j])),
                ])
