"""Tile counts and the tile-test statistic over a ladder of tilings."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .pit import ProbtileSeries

Z_DIVISIONS = 8
MIN_POINTS_PER_TILE = 2


class InsufficientPointsError(ValueError):
    pass


@dataclass(frozen=True)
class TilingSpec:
    t_divisions: int
    z_divisions: int = Z_DIVISIONS
    censor_central_z: bool = False
    censor_bands: int = 2

    def __post_init__(self):
        if self.t_divisions < 1:
            raise ValueError("t_divisions must be positive")
        if self.z_divisions < 2:
            raise ValueError("z_divisions must be >= 2")
        if self.censor_central_z:
            if self.z_divisions % 2 or self.censor_bands % 2 or self.censor_bands < 2:
                raise ValueError("censoring needs an even z_divisions and an even band count")
            if self.censor_bands >= self.z_divisions:
                raise ValueError("censoring would remove every band")

    @property
    def censored_bands(self) -> tuple[int, ...]:
        if not self.censor_central_z:
            return ()
        half, w = self.z_divisions // 2, self.censor_bands // 2
        return tuple(range(half - w, half + w))

    @property
    def tiles_used(self) -> int:
        return self.t_divisions * (self.z_divisions - len(self.censored_bands))


@dataclass(frozen=True)
class TileStats:
    spec: TilingSpec
    counts: np.ndarray          # (t_divisions, z_divisions)
    column_totals: np.ndarray   # (t_divisions,)
    sigma_dn: float

    @property
    def tiles_used(self) -> int:
        return self.spec.tiles_used


@dataclass(frozen=True)
class TilingLadder:
    specs: tuple[TilingSpec, ...]
    tile_lengths_years: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.specs)

    @property
    def t_divisions(self) -> list[int]:
        return [s.t_divisions for s in self.specs]

    def key(self) -> str:
        """Stable hash of the tilings (tile lengths are labels, not part of the key)."""
        payload = json.dumps([asdict(s) for s in self.specs], sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def index_of(self, spec: TilingSpec) -> int:
        try:
            return self.specs.index(spec)
        except ValueError:
            raise KeyError(f"tiling {spec} not in ladder") from None


def build_ladder(n_points: int, sample_years: float, z_divisions: int = Z_DIVISIONS,
                 censor_central_z: bool = False, censor_bands: int = 2) -> TilingLadder:
    """Tilings with ``T_t = round(sqrt(2)**k)``, while at least 2 points per tile remain."""
    if n_points < MIN_POINTS_PER_TILE * z_divisions:
        raise InsufficientPointsError(
            f"{n_points} points cannot fill {z_divisions} tiles with {MIN_POINTS_PER_TILE} each")
    t_max = n_points // (MIN_POINTS_PER_TILE * z_divisions)
    values: list[int] = []
    k = 0
    while True:
        t = round(math.sqrt(2.0) ** k)
        if t > t_max:
            break
        if not values or t > values[-1]:
            values.append(t)
        k += 1
    specs = tuple(TilingSpec(t, z_divisions, censor_central_z, censor_bands) for t in values)
    return TilingLadder(specs, tuple(sample_years / t for t in values))


def _time_coords(probtiles) -> np.ndarray:
    if isinstance(probtiles, ProbtileSeries):
        return probtiles.dates.astype("int64")
    return np.arange(len(probtiles), dtype=np.int64)


def column_index(time: np.ndarray, t_divisions: int) -> np.ndarray:
    """Equal-span columns between the first and last time; boundary points go right."""
    time = np.asarray(time, dtype=np.int64)
    t0, span = time[0], time[-1] - time[0]
    if span == 0:
        return np.zeros(len(time), dtype=np.int64)
    col = ((time - t0) * t_divisions) // span
    return np.minimum(col, t_divisions - 1)


def band_index(z: np.ndarray, z_divisions: int) -> np.ndarray:
    band = np.floor(np.asarray(z) * z_divisions).astype(np.int64)
    return np.clip(band, 0, z_divisions - 1)


def sigma_from_counts(counts: np.ndarray, spec: TilingSpec) -> float:
    keep = np.ones(spec.z_divisions, dtype=bool)
    keep[list(spec.censored_bands)] = False
    used = counts[:, keep].astype(float)
    mu = used.sum(axis=1, keepdims=True) / keep.sum()
    return math.sqrt(float(((used - mu) ** 2).sum()) / spec.tiles_used)


def tile_counts(probtiles, spec: TilingSpec, time: np.ndarray | None = None) -> TileStats:
    """Count probtiles per (time column, z band) tile and compute ``sigma_dn``.

    ``probtiles`` is a :class:`ProbtileSeries` (columns split calendar time) or
    a bare array of z values (columns split positions, as for simulated paths).
    """
    z = probtiles.z if isinstance(probtiles, ProbtileSeries) else np.asarray(probtiles, dtype=float)
    if len(z) == 0:
        raise InsufficientPointsError("empty probtile series")
    if time is None:
        time = _time_coords(probtiles)
    col = column_index(time, spec.t_divisions)
    band = band_index(z, spec.z_divisions)
    flat = np.bincount(col * spec.z_divisions + band,
                       minlength=spec.t_divisions * spec.z_divisions)
    counts = flat.reshape(spec.t_divisions, spec.z_divisions)
    return TileStats(spec, counts, counts.sum(axis=1), sigma_from_counts(counts, spec))


def sigma_ladder(probtiles, ladder: TilingLadder, time: np.ndarray | None = None
                 ) -> list[tuple[float, float]]:
    """``(tile length in years, sigma_dn)`` for every tiling of the ladder."""
    return [(length, tile_counts(probtiles, spec, time).sigma_dn)
            for spec, length in zip(ladder.specs, ladder.tile_lengths_years)]


def ladder_sigmas(z: np.ndarray, ladder: TilingLadder) -> np.ndarray:
    """Vector of ``sigma_dn`` on positional time, one per tiling (Monte Carlo path use)."""
    z = np.asarray(z, dtype=float)
    time = np.arange(len(z), dtype=np.int64)
    return np.array([tile_counts(z, s, time).sigma_dn for s in ladder.specs])


def stats_to_json(stats: TileStats, tile_length_years: float) -> dict:
    return {
        "t_divisions": stats.spec.t_divisions,
        "z_divisions": stats.spec.z_divisions,
        "censored": stats.spec.censor_central_z,
        "sigma_dn": stats.sigma_dn,
        "tile_length_years": tile_length_years,
    }
