"""Monte Carlo null distributions of the tile statistic.

All three benchmarks run on constant-volatility normal random walks:

* ``bench1`` maps the (overlapping, unit-variance) horizon return through
  the normal cdf;
* ``bench2`` maps it through the empirical cdf of the trailing sample of
  daily returns;
* ``bench3`` maps it through the empirical cdf of the trailing sample of
  overlapping horizon returns.

Each path ``k`` draws from its own Philox stream keyed by
``(master_seed, k)``, so results do not depend on how paths are scheduled.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import stats

from .market_data import ReturnSeries, moving_sum
from .pit import ProbtileSeries, empirical_cdf
from .tiling import TilingLadder, TilingSpec, ladder_sigmas

log = logging.getLogger(__name__)

KINDS = ("bench1", "bench2", "bench3")
N_TRAILING = 500
CACHE_VERSION = 1


class TilingMismatchError(KeyError):
    pass


def bench_kind(kind) -> str:
    """Normalize ``1``, ``"2"``, ``"bench3"`` ... to ``"benchN"``."""
    s = str(kind)
    if not s.startswith("bench"):
        s = f"bench{s}"
    if s not in KINDS:
        raise ValueError(f"unknown benchmark kind {kind!r}")
    return s


def path_rng(master_seed: int, path_index: int) -> np.random.Generator:
    ss = np.random.SeedSequence([int(master_seed), int(path_index)])
    return np.random.Generator(np.random.Philox(ss))


def raw_length(kind: str, horizon_days: int, n: int, n_trailing: int = N_TRAILING) -> int:
    """Number of daily draws a path needs to deliver ``n`` probtiles."""
    kind, dt = bench_kind(kind), int(horizon_days)
    if kind == "bench1":
        return n + dt - 1
    if kind == "bench2":
        return n + n_trailing + dt - 1
    return n + n_trailing + 2 * (dt - 1)


def moving_sum_scaled(e: np.ndarray, horizon_days: int) -> np.ndarray:
    """Overlapping sums of ``horizon_days`` draws, divided by sqrt(horizon_days)."""
    dt = int(horizon_days)
    s = moving_sum(e, dt)
    return s if dt == 1 else s / math.sqrt(dt)


def simulate_returns(n_out: int, horizon_days: int, seed=0) -> ReturnSeries:
    """Unit-variance overlapping horizon returns of a normal random walk."""
    if n_out < 1:
        raise ValueError("n_out must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else path_rng(seed, 0)
    e = rng.standard_normal(n_out + horizon_days - 1)
    y = moving_sum_scaled(e, horizon_days)
    dates = np.busday_offset(np.datetime64("2000-01-03", "D"), np.arange(n_out), roll="forward")
    return ReturnSeries(dates, y, int(horizon_days), "sqrt_dt_scaled", "simulated")


def bench_z(kind: str, horizon_days: int, n: int, rng: np.random.Generator,
            n_trailing: int = N_TRAILING) -> np.ndarray:
    """Probtiles of one simulated path (length exactly ``n``)."""
    kind, dt = bench_kind(kind), int(horizon_days)
    e = rng.standard_normal(raw_length(kind, dt, n, n_trailing))
    if kind == "bench1":
        return stats.norm.cdf(moving_sum_scaled(e, dt))
    if kind == "bench2":
        # window j: e[j : j + n_trailing]; next horizon return starts at j + n_trailing
        y = moving_sum_scaled(e[n_trailing:], dt)
        windows = sliding_window_view(e[:n - 1 + n_trailing], n_trailing)
        return empirical_cdf(windows, y[:n])
    # bench3: forecast at day t = j + n_trailing + dt - 1 uses y[t-dt-n_trailing+1 .. t-dt]
    y = moving_sum_scaled(e, dt)
    windows = sliding_window_view(y[:n - 1 + n_trailing], n_trailing)
    return empirical_cdf(windows, y[n_trailing + dt - 1:n_trailing + dt - 1 + n])


def bench_probtiles(kind, horizon_days: int, n: int, n_trailing: int = N_TRAILING,
                    seed: int = 0) -> ProbtileSeries:
    return ProbtileSeries.positional(bench_z(kind, horizon_days, n, path_rng(seed, 0), n_trailing))


@dataclass(frozen=True)
class NullDistribution:
    """Sorted Monte Carlo samples of ``sigma_dn``, one row per tiling."""

    ladder: TilingLadder
    samples: np.ndarray  # (n_tilings, n_mc), rows sorted ascending
    meta: dict = field(default_factory=dict)

    @property
    def n_mc(self) -> int:
        return self.samples.shape[1]

    @property
    def mean(self) -> np.ndarray:
        return self.samples.mean(axis=1)

    @property
    def std(self) -> np.ndarray:
        return self.samples.std(axis=1, ddof=1)

    def quantile(self, tiling_index: int, q: float) -> float:
        return float(np.quantile(self.samples[tiling_index], q))


def _path_sigmas(args) -> np.ndarray:
    kind, dt, n, ladder, master_seed, n_trailing, k0, k1 = args
    out = np.empty((k1 - k0, len(ladder)))
    for row, k in enumerate(range(k0, k1)):
        z = bench_z(kind, dt, n, path_rng(master_seed, k), n_trailing)
        out[row] = ladder_sigmas(z, ladder)
    return out


def cache_key(kind: str, horizon_days: int, n: int, ladder: TilingLadder, n_mc: int,
              master_seed: int, n_trailing: int = N_TRAILING) -> dict:
    censor = sorted({(s.censor_central_z, s.censor_bands if s.censor_central_z else 0)
                     for s in ladder.specs})
    return {
        "version": CACHE_VERSION, "kind": bench_kind(kind), "dt": int(horizon_days), "n": int(n),
        "ladder": ladder.key(), "censoring": [list(c) for c in censor], "n_mc": int(n_mc),
        "seed": int(master_seed), "n_trailing": int(n_trailing),
    }


def _key_hash(key: dict) -> str:
    return hashlib.sha256(json.dumps(key, sort_keys=True).encode()).hexdigest()[:20]


def null_distribution(kind, horizon_days: int, n: int, ladder: TilingLadder, n_mc: int = 500,
                      master_seed: int = 0, n_trailing: int = N_TRAILING, jobs: int = 1,
                      cache_dir=None) -> NullDistribution:
    """Simulate ``n_mc`` paths and collect ``sigma_dn`` on every tiling of ``ladder``.

    Censoring follows the ladder's tiling specs, so build the ladder with the
    same censoring as the empirical run.
    """
    kind = bench_kind(kind)
    key = cache_key(kind, horizon_days, n, ladder, n_mc, master_seed, n_trailing)
    if cache_dir is not None:
        hit = load_null(cache_dir, key, ladder)
        if hit is not None:
            return hit
    chunk = max(1, min(25, math.ceil(n_mc / max(1, 4 * jobs))))
    tasks = [(kind, int(horizon_days), int(n), ladder, int(master_seed), int(n_trailing),
              k0, min(k0 + chunk, n_mc)) for k0 in range(0, n_mc, chunk)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_path_sigmas, tasks))
    else:
        parts = [_path_sigmas(t) for t in tasks]
    per_path = np.vstack(parts)  # rows ordered by path index
    samples = np.sort(per_path.T, axis=1)
    null = NullDistribution(ladder, samples, key)
    if cache_dir is not None:
        save_null(cache_dir, null)
    return null


def p_value(null: NullDistribution, tiling, sigma_emp: float) -> float:
    """Fraction of Monte Carlo samples strictly larger than ``sigma_emp``.

    ``tiling`` is a ladder index or a :class:`TilingSpec`, which must match one
    of the null's tilings exactly (divisions and censoring).
    """
    if isinstance(tiling, TilingSpec):
        try:
            idx = null.ladder.index_of(tiling)
        except KeyError as exc:
            raise TilingMismatchError(str(exc)) from None
    else:
        idx = int(tiling)
        if not 0 <= idx < len(null.ladder):
            raise TilingMismatchError(f"tiling index {idx} outside the null's ladder")
    row = null.samples[idx]
    return float(len(row) - np.searchsorted(row, sigma_emp, side="right")) / len(row)


# ---------------------------------------------------------------------------
# cache: <hash>.json (key, ladder, summary) + <hash>.npy (float64 samples)

def _paths(cache_dir, key: dict) -> tuple[Path, Path]:
    h = _key_hash(key)
    base = Path(cache_dir) / f"null_{key['kind']}_dt{key['dt']}_n{key['n']}_{h}"
    return base.with_suffix(".json"), base.with_suffix(".npy")


def save_null(cache_dir, null: NullDistribution) -> None:
    Path(cache_dir).mkdir(parents=True, exist_ok=True)
    meta_path, arr_path = _paths(cache_dir, null.meta)
    np.save(arr_path, null.samples)
    meta = {
        "key": null.meta,
        "t_divisions": null.ladder.t_divisions,
        "z_divisions": [s.z_divisions for s in null.ladder.specs],
        "tile_lengths_years": list(null.ladder.tile_lengths_years),
        "mean": null.mean.tolist(),
        "std": null.std.tolist(),
        "samples_file": arr_path.name,
    }
    meta_path.write_text(json.dumps(meta, indent=1))


def load_null(cache_dir, key: dict, ladder: TilingLadder) -> NullDistribution | None:
    meta_path, arr_path = _paths(cache_dir, key)
    if not (meta_path.exists() and arr_path.exists()):
        return None
    meta = json.loads(meta_path.read_text())
    if meta.get("key") != key:
        return None
    samples = np.load(arr_path)
    if samples.shape != (len(ladder), key["n_mc"]):
        log.warning("ignoring malformed cache entry %s", arr_path)
        return None
    log.debug("null cache hit %s", meta_path.name)
    return NullDistribution(ladder, samples, key)
