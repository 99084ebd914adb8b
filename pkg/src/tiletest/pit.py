"""Probability integral transform of realized returns into probtiles.

Empirical distributions use a continuous cdf: order statistics sit at the
plotting positions ``(i - 0.5) / n`` (tied values share their midrank), the
cdf is linear in between, and values outside the scenario range are clipped
to ``0.5 / n`` and ``1 - 0.5 / n``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class EmptySeriesError(ValueError):
    pass


def empirical_cdf(scenarios: np.ndarray, x: np.ndarray, chunk: int = 1024) -> np.ndarray:
    """Interpolated empirical cdf, one scenario set per query.

    Parameters
    ----------
    scenarios : (m, n) array
        Row ``k`` holds the scenario sample used for query ``x[k]``. May be a
        strided view (e.g. ``sliding_window_view``); it is never copied whole.
    x : (m,) array
        Query points.

    Returns
    -------
    (m,) array of cumulative probabilities in ``[0.5/n, 1 - 0.5/n]``.
    """
    scenarios = np.asarray(scenarios, dtype=float)
    x = np.asarray(x, dtype=float)
    if scenarios.ndim != 2 or scenarios.shape[0] != x.shape[0]:
        raise ValueError("scenarios must be (m, n) with one row per query")
    m, n = scenarios.shape
    out = np.empty(m)
    for start in range(0, m, chunk):
        stop = min(start + chunk, m)
        out[start:stop] = _ecdf_block(scenarios[start:stop], x[start:stop], n)
    return out


def _ecdf_block(w: np.ndarray, x: np.ndarray, n: int) -> np.ndarray:
    xc = x[:, None]
    le = w <= xc
    k = le.sum(axis=1)
    lo = np.where(le, w, -np.inf).max(axis=1)
    hi = np.where(le, np.inf, w).min(axis=1)
    c_lo = (w == lo[:, None]).sum(axis=1)
    c_hi = (w == hi[:, None]).sum(axis=1)

    inside = (k > 0) & (k < n)
    z = np.where(k == 0, 0.5 / n, 1.0 - 0.5 / n)
    # x equal to the maximum: midrank position of the top value
    at_max = (k == n) & (lo == x)
    z = np.where(at_max, (n - 0.5 * c_lo) / n, z)
    if np.any(inside):
        lo_i, hi_i, x_i = lo[inside], hi[inside], x[inside]
        frac = (x_i - lo_i) / (hi_i - lo_i)
        pos = k[inside] - 0.5 * c_lo[inside] + frac * 0.5 * (c_lo[inside] + c_hi[inside])
        z[inside] = pos / n
    return z


def empirical_cdf_1d(scenarios: np.ndarray, x) -> np.ndarray:
    """Same rule as :func:`empirical_cdf` for a single scenario set."""
    s = np.sort(np.asarray(scenarios, dtype=float))
    n = len(s)
    u, counts = np.unique(s, return_counts=True)
    cum = np.cumsum(counts)
    pos = (cum - 0.5 * counts) / n
    x = np.asarray(x, dtype=float)
    z = np.interp(x, u, pos)
    z = np.where(x < u[0], 0.5 / n, z)
    return np.where(x > u[-1], 1.0 - 0.5 / n, z)


@dataclass(frozen=True)
class ProbtileSeries:
    dates: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        z = np.asarray(self.z, dtype=float)
        if dates.shape != z.shape or z.ndim != 1:
            raise ValueError("dates and z must be 1-d and of equal length")
        if np.any((z < 0) | (z > 1)) or np.any(np.isnan(z)):
            raise ValueError("probtiles must lie in [0, 1]")
        if np.any(np.diff(dates) <= np.timedelta64(0, "D")):
            raise ValueError("dates must be strictly increasing")
        dates.flags.writeable = False
        z.flags.writeable = False
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "z", z)

    def __len__(self) -> int:
        return len(self.z)

    @classmethod
    def positional(cls, z, start: str = "2000-01-03") -> "ProbtileSeries":
        """Probtiles on consecutive business days, as used for simulated paths."""
        dates = np.busday_offset(np.datetime64(start, "D"), np.arange(len(z)), roll="forward")
        return cls(dates, z)

    def sample_years(self) -> float:
        if len(self) < 2:
            return 0.0
        return float((self.dates[-1] - self.dates[0]) / np.timedelta64(1, "D")) / 365.25

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["date", "z"])
            for d, z in zip(self.dates, self.z):
                w.writerow([str(d), repr(float(z))])

    @classmethod
    def from_csv(cls, path) -> "ProbtileSeries":
        with Path(path).open(newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls(np.array([r["date"] for r in rows], dtype="datetime64[D]"),
                   np.array([float(r["z"]) for r in rows]))


def probtile(forecast, realized_return: float) -> float:
    """Cumulative probability of ``realized_return`` under ``forecast``."""
    return float(forecast.cdf(realized_return))


def probtile_series(forecasts, returns_dt) -> ProbtileSeries:
    """PIT every realized ``horizon_days`` return through its ex-ante forecast.

    ``forecasts`` is a :class:`tiletest.forecasters.ForecastSeries` whose entry
    dated ``t`` targets the return ending ``horizon`` rows later; ``returns_dt``
    holds those realized returns, dated by their end.
    """
    dt = forecasts.horizon_days
    if returns_dt.horizon_days != dt:
        raise ValueError("forecast and return horizons differ")
    ret_pos = {d: i for i, d in enumerate(returns_dt.dates.astype("int64"))}
    # target date: the date `dt` rows after the forecast date in the daily grid
    targets = forecasts.target_dates
    keep, idx = [], []
    for j, d in enumerate(targets.astype("int64")):
        i = ret_pos.get(d)
        if i is not None:
            keep.append(j)
            idx.append(i)
    if not keep:
        raise EmptySeriesError("no overlap between forecast targets and realized returns")
    keep = np.array(keep)
    z = forecasts.subset(keep).cdf(returns_dt.values[np.array(idx)])
    return ProbtileSeries(forecasts.dates[keep], z)
