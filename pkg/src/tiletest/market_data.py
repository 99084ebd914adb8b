"""Daily price series loading and horizon return construction."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

Scaling = Literal["raw", "sqrt_dt_scaled"]


class DataError(ValueError):
    """Raised for malformed or invalid input series."""


class InsufficientDataError(DataError):
    pass


def _as_dates(dates) -> np.ndarray:
    return np.asarray(dates, dtype="datetime64[D]")


def _freeze(*arrays: np.ndarray) -> None:
    for a in arrays:
        a.flags.writeable = False


@dataclass(frozen=True)
class PriceSeries:
    """Dated positive prices, strictly increasing in date."""

    instrument_id: str
    dates: np.ndarray
    prices: np.ndarray

    def __post_init__(self):
        dates = _as_dates(self.dates)
        prices = np.asarray(self.prices, dtype=float)
        if dates.shape != prices.shape or dates.ndim != 1:
            raise DataError("dates and prices must be 1-d arrays of equal length")
        if len(prices) < 2:
            raise DataError("a price series needs at least 2 observations")
        if np.any(np.diff(dates) <= np.timedelta64(0, "D")):
            raise DataError("dates must be strictly increasing")
        if not np.all(np.isfinite(prices)) or np.any(prices <= 0):
            bad = int(np.flatnonzero(~(prices > 0))[0])
            raise DataError(f"non-positive price at position {bad}")
        _freeze(dates, prices)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "prices", prices)

    def __len__(self) -> int:
        return len(self.prices)


@dataclass(frozen=True)
class ReturnSeries:
    """Log returns over ``horizon_days``, sampled once per business day.

    The return dated ``dates[i]`` covers the ``horizon_days`` rows ending at
    that date.
    """

    dates: np.ndarray
    values: np.ndarray
    horizon_days: int = 1
    scaling: Scaling = "raw"
    instrument_id: str = ""

    def __post_init__(self):
        dates = _as_dates(self.dates)
        values = np.asarray(self.values, dtype=float)
        if dates.shape != values.shape or dates.ndim != 1:
            raise DataError("dates and values must be 1-d arrays of equal length")
        if np.any(np.diff(dates) <= np.timedelta64(0, "D")):
            raise DataError("dates must be strictly increasing")
        if self.horizon_days < 1:
            raise DataError("horizon_days must be positive")
        if self.scaling not in ("raw", "sqrt_dt_scaled"):
            raise DataError(f"unknown scaling {self.scaling!r}")
        _freeze(dates, values)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)


def load_csv(path, date_column: str = "date", price_column: str = "price",
              instrument_id: str | None = None) -> PriceSeries:
    """Read a ``date,price`` CSV into a :class:`PriceSeries`.

    Rows may be in any order; they are sorted by date. Line numbers in error
    messages count the header as line 1.
    """
    path = Path(path)
    dates: list[np.datetime64] = []
    prices: list[float] = []
    lines: list[int] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or date_column not in reader.fieldnames \
                or price_column not in reader.fieldnames:
            raise DataError(f"{path}: header must contain {date_column!r} and {price_column!r}")
        for row in reader:
            line = reader.line_num
            try:
                d = np.datetime64(row[date_column].strip(), "D")
                p = float(row[price_column])
            except (ValueError, TypeError, AttributeError) as exc:
                raise DataError(f"{path}: cannot parse line {line}: {exc}") from None
            if np.isnat(d):
                raise DataError(f"{path}: cannot parse date on line {line}")
            if not p > 0 or not np.isfinite(p):
                raise DataError(f"{path}: non-positive price on line {line} (row {line - 1})")
            dates.append(d)
            prices.append(p)
            lines.append(line)
    if not dates:
        raise DataError(f"{path}: no data rows")
    d_arr = np.array(dates, dtype="datetime64[D]")
    order = np.argsort(d_arr, kind="stable")
    d_sorted = d_arr[order]
    dup = np.flatnonzero(d_sorted[1:] == d_sorted[:-1])
    if dup.size:
        first = order[dup[0] + 1]
        raise DataError(f"{path}: duplicate date {d_sorted[dup[0]]} on line {lines[first]}")
    return PriceSeries(instrument_id or path.stem, d_sorted, np.array(prices)[order])


def save_csv(series: PriceSeries, path) -> None:
    # repr() keeps floats round-trippable
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["date", "price"])
        for d, p in zip(series.dates, series.prices):
            w.writerow([str(d), repr(float(p))])


def log_returns(series: PriceSeries, horizon_days: int = 1,
                scaling: Scaling = "raw") -> ReturnSeries:
    """Overlapping log returns over ``horizon_days`` rows, one per row.

    Business-day arithmetic is positional: a gap in the dates (holiday) is a
    single step.
    """
    dt = int(horizon_days)
    if dt < 1:
        raise DataError("horizon_days must be positive")
    if len(series) <= dt:
        raise InsufficientDataError(
            f"{len(series)} prices cannot yield a {dt}-day return")
    logp = np.log(series.prices)
    values = logp[dt:] - logp[:-dt]
    if scaling == "sqrt_dt_scaled":
        values = values / np.sqrt(dt)
    return ReturnSeries(series.dates[dt:], values, dt, scaling, series.instrument_id)


def aggregate_returns(returns_1d: ReturnSeries, horizon_days: int) -> ReturnSeries:
    """Moving sum of ``horizon_days`` consecutive daily returns."""
    dt = int(horizon_days)
    if returns_1d.horizon_days != 1 or returns_1d.scaling != "raw":
        raise DataError("aggregate_returns expects raw daily returns")
    if len(returns_1d) < dt:
        raise InsufficientDataError("series shorter than the horizon")
    values = moving_sum(returns_1d.values, dt)
    return ReturnSeries(returns_1d.dates[dt - 1:], values, dt, "raw",
                        returns_1d.instrument_id)


def moving_sum(x: np.ndarray, window: int) -> np.ndarray:
    """Sums of ``window`` consecutive elements; length ``len(x) - window + 1``."""
    x = np.asarray(x, dtype=float)
    if window == 1:
        return x.copy()
    return sliding_window_view(x, window).sum(axis=1)


def valid_counts_per_interval(series: ReturnSeries,
                              intervals: Sequence[tuple]) -> list[int]:
    """Count observations in each ``[start, end)`` date interval.

    The last interval is closed on the right. The intervals must be
    contiguous and cover the whole date span of ``series``.
    """
    if not intervals:
        raise DataError("no intervals given")
    bounds = [(np.datetime64(a, "D"), np.datetime64(b, "D")) for a, b in intervals]
    for (a0, b0), (a1, _) in zip(bounds, bounds[1:]):
        if b0 != a1:
            raise DataError("intervals must be contiguous")
    if any(b < a for a, b in bounds):
        raise DataError("interval end before start")
    if len(series) and (bounds[0][0] > series.dates[0] or bounds[-1][1] < series.dates[-1]):
        raise DataError("intervals do not cover the series date span")
    edges = np.array([a for a, _ in bounds] + [bounds[-1][1]], dtype="datetime64[D]")
    idx = np.searchsorted(edges, series.dates, side="right") - 1
    idx = np.minimum(idx, len(bounds) - 1)
    return np.bincount(idx, minlength=len(bounds)).tolist()
