"""Methodology scores and plot-ready tables."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .benchmark import NullDistribution


class LadderMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class SeriesResult:
    instrument_id: str
    methodology: str
    horizon_days: int
    t_divisions: tuple[int, ...]
    censored: bool
    tile_lengths_years: tuple[float, ...]
    sigma_dn: tuple[float, ...]
    p: tuple[float, ...]
    n_points: int = 0
    benchmark: str = ""

    def __post_init__(self):
        k = len(self.t_divisions)
        if not (len(self.tile_lengths_years) == len(self.sigma_dn) == len(self.p) == k):
            raise ValueError("one entry per tiling expected")
        if any(not 0.0 <= v <= 1.0 for v in self.p):
            raise ValueError("p-values must lie in [0, 1]")


@dataclass(frozen=True)
class MethodologyScore:
    methodology: str
    horizon_days: int
    t_divisions: tuple[int, ...]
    censored: bool
    tile_lengths_years: tuple[float, ...]
    mean_p: tuple[float, ...]
    n_series: int


def aggregate(results: Sequence[SeriesResult]) -> MethodologyScore:
    """Per-tiling mean p-value over a set of series."""
    if not results:
        raise ValueError("nothing to aggregate")
    first = results[0]
    for r in results[1:]:
        if (r.methodology, r.horizon_days) != (first.methodology, first.horizon_days):
            raise LadderMismatchError("results mix methodologies or horizons")
        if (r.t_divisions, r.censored) != (first.t_divisions, first.censored):
            raise LadderMismatchError("results were computed on different ladders")
    # sort so the float sums do not depend on input order
    p = np.sort(np.array([r.p for r in results]), axis=0)
    lengths = np.sort(np.array([r.tile_lengths_years for r in results]), axis=0)
    return MethodologyScore(
        first.methodology, first.horizon_days, first.t_divisions, first.censored,
        tuple(float(v) for v in lengths.mean(axis=0)),
        tuple(float(v) for v in p.mean(axis=0)), len(results))


def folded_cdf(samples: Iterable[float]) -> list[tuple[float, float]]:
    """Folded empirical cdf at each distinct sample value.

    The lower tail uses ``P(X <= x)`` and the upper tail ``P(X >= x)``
    (``i/n`` and ``(n-i+1)/n`` at the i-th order statistic), capped at 0.5.
    """
    x = np.sort(np.asarray(list(samples), dtype=float))
    n = len(x)
    if n < 2:
        raise ValueError("folded_cdf needs at least 2 samples")
    u, counts = np.unique(x, return_counts=True)
    below = np.cumsum(counts) / n
    above = (n - np.cumsum(counts) + counts) / n
    folded = np.minimum(np.minimum(below, above), 0.5)
    return [(float(a), float(b)) for a, b in zip(u, folded)]


@dataclass(frozen=True)
class BandRow:
    t_divisions: int
    tile_length_years: float
    mean: float
    lower: float
    upper: float
    scaled_mean: float
    std: float


def null_bands(null: NullDistribution) -> list[BandRow]:
    """Mean, one-sigma band and ``mean / sqrt(tile length)`` per tiling."""
    rows = []
    for j, spec in enumerate(null.ladder.specs):
        mu, sd = float(null.mean[j]), float(null.std[j])
        length = float(null.ladder.tile_lengths_years[j])
        rows.append(BandRow(spec.t_divisions, length, mu, mu - sd, mu + sd,
                            mu / math.sqrt(length), sd))
    return rows


# ---------------------------------------------------------------------------
# writers; floats use repr() so every value round-trips exactly

def _f(v: float) -> str:
    return repr(float(v))


def write_pvalues(path, results: Sequence[SeriesResult]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["instrument", "benchmark", "censored", "n_points", "t_divisions",
                    "tile_length_years", "sigma_dn", "p"])
        for r in results:
            for t, length, s, p in zip(r.t_divisions, r.tile_lengths_years, r.sigma_dn, r.p):
                w.writerow([r.instrument_id, r.benchmark, int(r.censored), r.n_points, t,
                            _f(length), _f(s), _f(p)])


def write_scores(path, scores: Sequence[MethodologyScore]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["censored", "n_series", "t_divisions", "tile_length_years", "mean_p"])
        for sc in scores:
            for t, length, p in zip(sc.t_divisions, sc.tile_lengths_years, sc.mean_p):
                w.writerow([int(sc.censored), sc.n_series, t, _f(length), _f(p)])


def write_null_bands(path, labelled: Sequence[tuple[str, NullDistribution]]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["null_id", "t_divisions", "tile_length_years", "mean", "mean_minus_std",
                    "mean_plus_std", "scaled_mean", "std"])
        for label, null in labelled:
            for b in null_bands(null):
                w.writerow([label, b.t_divisions, _f(b.tile_length_years), _f(b.mean),
                            _f(b.lower), _f(b.upper), _f(b.scaled_mean), _f(b.std)])


def write_folded_cdf(path, labelled: Sequence[tuple[str, Sequence[float]]]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["null_id", "sigma_dn", "folded_cdf"])
        for label, samples in labelled:
            for v, f in folded_cdf(samples):
                w.writerow([label, _f(v), _f(f)])


def read_table(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))
