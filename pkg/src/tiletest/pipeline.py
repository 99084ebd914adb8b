"""End-to-end runs: data -> forecasts -> probtiles -> tile test -> reports."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy
import yaml

from . import __version__
from .benchmark import NullDistribution, bench_kind, null_distribution, p_value
from .forecasters import FAMILIES, MethodologySpec, build_forecasts
from .market_data import PriceSeries, aggregate_returns, load_csv, log_returns
from .pit import ProbtileSeries, probtile_series
from .report import (SeriesResult, aggregate, write_folded_cdf, write_null_bands,
                     write_pvalues, write_scores)
from .synthetic import SYNTH_KINDS, synth_generate
from .tiling import TilingLadder, TilingSpec, build_ladder, tile_counts

log = logging.getLogger(__name__)

# fixed distribution -> bench1, trailing daily sample -> bench2, trailing horizon sample -> bench3
DEFAULT_BENCHMARKS = {
    "hist_returns_1d": "bench2",
    "hist_returns_dt": "bench3",
    "riskmetrics94": "bench1",
    "lmarch_normal": "bench1",
    "lmarch_student": "bench1",
    "lmarch_empirical_1d": "bench2",
    "lmarch_empirical_dt": "bench3",
}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# single series

def series_probtiles(prices: PriceSeries, spec: MethodologySpec, horizon_days: int) -> ProbtileSeries:
    r1 = log_returns(prices, 1)
    forecasts = build_forecasts(spec, r1, horizon_days)
    return probtile_series(forecasts, aggregate_returns(r1, horizon_days))


def ladder_for(t_divisions, sample_years: float, censor: bool = False,
               censor_bands: int = 2, z_divisions: int = 8) -> TilingLadder:
    specs = tuple(TilingSpec(t, z_divisions, censor, censor_bands) for t in t_divisions)
    return TilingLadder(specs, tuple(sample_years / t for t in t_divisions))


def evaluate(probtiles: ProbtileSeries, null: NullDistribution, instrument_id: str = "",
             methodology: str = "", horizon_days: int = 1) -> SeriesResult:
    """Tile-test ``probtiles`` on the null's ladder and attach p-values."""
    ladder = null.ladder
    sig, ps = [], []
    for j, spec in enumerate(ladder.specs):
        s = tile_counts(probtiles, spec).sigma_dn
        sig.append(s)
        ps.append(p_value(null, j, s))
    years = probtiles.sample_years()
    return SeriesResult(
        instrument_id, methodology, int(horizon_days), tuple(ladder.t_divisions),
        ladder.specs[0].censor_central_z, tuple(years / t for t in ladder.t_divisions),
        tuple(sig), tuple(ps), len(probtiles), null.meta.get("kind", ""))


# ---------------------------------------------------------------------------
# configuration

@dataclass
class InstrumentConfig:
    id: str
    csv: str | None = None
    synth: dict | None = None
    asset_class: str = "default"
    censor: bool | None = None

    def load(self) -> PriceSeries:
        if self.csv is not None:
            return load_csv(self.csv, instrument_id=self.id)
        s = self.synth
        return synth_generate(s["kind"], s.get("params"), int(s.get("n_days", 5000)),
                              int(s.get("seed", 0)), instrument_id=self.id)

    def to_dict(self) -> dict:
        d = {"id": self.id, "class": self.asset_class}
        if self.csv is not None:
            d["csv"] = self.csv
        if self.synth is not None:
            d["synth"] = self.synth
        if self.censor is not None:
            d["censor"] = self.censor
        return d


@dataclass
class RunConfig:
    instruments: list[InstrumentConfig]
    methodologies: list[MethodologySpec]
    horizons: list[int] = field(default_factory=lambda: [1])
    benchmarks: dict[str, str] = field(default_factory=dict)
    censoring: dict[str, bool] = field(default_factory=dict)
    censor_bands: int = 2
    n_mc: int = 500
    master_seed: int = 0
    run_id: str = "run"
    out: str = "results"
    cache_dir: str | None = None
    write_probtiles: bool = True

    def __post_init__(self):
        if not self.instruments:
            raise ConfigError("no instruments configured")
        if not self.methodologies:
            raise ConfigError("no methodologies configured")
        if not self.horizons or any(int(h) < 1 for h in self.horizons):
            raise ConfigError("horizons must be positive integers")
        if self.n_mc < 1:
            raise ConfigError("n_mc must be positive")
        ids = [i.id for i in self.instruments]
        if len(set(ids)) != len(ids):
            raise ConfigError("instrument ids must be unique")
        for fam, kind in self.benchmarks.items():
            if fam not in FAMILIES:
                raise ConfigError(f"benchmark override for unknown methodology {fam!r}")
            self.benchmarks[fam] = bench_kind(kind)
        labels = [methodology_label(m) for m in self.methodologies]
        if len(set(labels)) != len(labels):
            raise ConfigError("methodologies must be distinct")

    def benchmark_for(self, spec: MethodologySpec) -> str:
        return self.benchmarks.get(spec.family, DEFAULT_BENCHMARKS[spec.family])

    def censored(self, inst: InstrumentConfig) -> bool:
        if inst.censor is not None:
            return bool(inst.censor)
        return bool(self.censoring.get(inst.asset_class, False))

    def to_dict(self) -> dict:
        """Everything that determines the results (output locations excluded)."""
        return {
            "run_id": self.run_id,
            "master_seed": self.master_seed,
            "n_mc": self.n_mc,
            "horizons": [int(h) for h in self.horizons],
            "censor_bands": self.censor_bands,
            "censoring": dict(sorted(self.censoring.items())),
            "benchmarks": dict(sorted(self.benchmarks.items())),
            "instruments": [i.to_dict() for i in self.instruments],
            "methodologies": [m.to_dict() for m in self.methodologies],
            "write_probtiles": self.write_probtiles,
        }

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | None = None) -> "RunConfig":
        if "config" in d and "instruments" not in d:
            d = d["config"]  # a manifest.json
        try:
            instruments = [_instrument(x, base_dir) for x in d.get("instruments") or []]
            methodologies = [MethodologySpec.from_dict({"family": m} if isinstance(m, str) else m)
                             for m in d.get("methodologies") or []]
        except (TypeError, KeyError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        known = {"run_id", "master_seed", "n_mc", "horizons", "censor_bands", "censoring",
                 "benchmarks", "instruments", "methodologies", "out", "cache_dir",
                 "write_probtiles"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        try:
            return cls(
                instruments=instruments, methodologies=methodologies,
                horizons=[int(h) for h in d.get("horizons", [1])],
                benchmarks=dict(d.get("benchmarks") or {}),
                censoring={str(k): bool(v) for k, v in (d.get("censoring") or {}).items()},
                censor_bands=int(d.get("censor_bands", 2)),
                n_mc=int(d.get("n_mc", 500)), master_seed=int(d.get("master_seed", 0)),
                run_id=str(d.get("run_id", "run")), out=str(d.get("out", "results")),
                cache_dir=d.get("cache_dir"), write_probtiles=bool(d.get("write_probtiles", True)))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


def _instrument(x: dict, base_dir: Path | None) -> InstrumentConfig:
    if "id" not in x:
        raise ConfigError("every instrument needs an id")
    if ("csv" in x) == ("synth" in x):
        raise ConfigError(f"instrument {x['id']}: give exactly one of csv / synth")
    csv_path = x.get("csv")
    if csv_path is not None and base_dir is not None and not Path(csv_path).is_absolute():
        csv_path = str((base_dir / csv_path).resolve())
    synth = x.get("synth")
    if synth is not None and synth.get("kind") not in SYNTH_KINDS:
        raise ConfigError(f"instrument {x['id']}: unknown synth kind {synth.get('kind')!r}")
    return InstrumentConfig(str(x["id"]), csv_path, synth, str(x.get("class", "default")),
                            x.get("censor"))


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping at the top level")
    return RunConfig.from_dict(data, path.parent.resolve())


def methodology_label(spec: MethodologySpec) -> str:
    default = MethodologySpec(spec.family)
    if spec == default:
        return spec.family
    parts = [spec.family]
    if spec.n_hist != default.n_hist:
        parts.append(f"n{spec.n_hist}")
    if spec.student_dof != default.student_dof:
        parts.append(f"dof{spec.student_dof:g}")
    if spec.ewma_lambda != default.ewma_lambda:
        parts.append(f"lam{spec.ewma_lambda:g}")
    if spec.lmarch != default.lmarch:
        parts.append("lm" + hashlib.sha256(repr(spec.lmarch).encode()).hexdigest()[:8])
    return "_".join(parts)


# ---------------------------------------------------------------------------
# run

@dataclass
class RunOutcome:
    root: Path
    results: dict = field(default_factory=dict)   # (label, dt) -> list[SeriesResult]
    failures: list = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return 2 if self.failures else 0


def run(config: RunConfig, jobs: int = 1) -> RunOutcome:
    """Execute every (methodology, horizon) unit over all instruments."""
    root = Path(config.out) / config.run_id
    root.mkdir(parents=True, exist_ok=True)
    cache_dir = Path(config.cache_dir) if config.cache_dir else Path(config.out) / "null_cache"
    outcome = RunOutcome(root)

    prices: dict[str, PriceSeries] = {}
    for inst in config.instruments:
        try:
            prices[inst.id] = inst.load()
        except Exception as exc:  # noqa: BLE001 - reported in the manifest
            outcome.failures.append({"instrument": inst.id, "stage": "load", "error": repr(exc)})

    nulls: dict[str, NullDistribution] = {}
    for spec in config.methodologies:
        label = methodology_label(spec)
        kind = config.benchmark_for(spec)
        for dt in config.horizons:
            unit_dir = root / label / str(dt)
            unit_dir.mkdir(parents=True, exist_ok=True)
            probtiles: dict[str, ProbtileSeries] = {}
            for inst in config.instruments:
                if inst.id not in prices:
                    continue
                try:
                    probtiles[inst.id] = series_probtiles(prices[inst.id], spec, dt)
                except Exception as exc:  # noqa: BLE001
                    outcome.failures.append({"instrument": inst.id, "methodology": label,
                                             "dt": dt, "stage": "probtiles", "error": repr(exc)})
            results: list[SeriesResult] = []
            unit_nulls: dict[str, NullDistribution] = {}
            groups: dict[bool, list[str]] = {}
            for inst in config.instruments:
                if inst.id in probtiles:
                    groups.setdefault(config.censored(inst), []).append(inst.id)
            for censor, ids in sorted(groups.items()):
                n_min = min(len(probtiles[i]) for i in ids)
                try:
                    t_divs = build_ladder(n_min, 1.0).t_divisions
                except ValueError as exc:
                    for i in ids:
                        outcome.failures.append({"instrument": i, "methodology": label, "dt": dt,
                                                 "stage": "ladder", "error": repr(exc)})
                    continue
                for i in ids:
                    pt = probtiles[i]
                    try:
                        ladder = ladder_for(t_divs, pt.sample_years(), censor, config.censor_bands)
                        nkey = f"{kind}_dt{dt}_n{len(pt)}_c{int(censor)}"
                        if nkey not in nulls or nulls[nkey].ladder.specs != ladder.specs:
                            nulls[nkey] = null_distribution(
                                kind, dt, len(pt), ladder, config.n_mc, config.master_seed,
                                jobs=jobs, cache_dir=cache_dir)
                        null = NullDistribution(ladder, nulls[nkey].samples, nulls[nkey].meta)
                        unit_nulls.setdefault(nkey, null)
                        results.append(evaluate(pt, null, i, label, dt))
                    except Exception as exc:  # noqa: BLE001
                        outcome.failures.append({"instrument": i, "methodology": label, "dt": dt,
                                                 "stage": "tile_test", "error": repr(exc)})
            outcome.results[(label, dt)] = results
            _write_unit(unit_dir, config, spec, label, dt, kind, results, unit_nulls,
                        probtiles, outcome.failures)

    manifest = {
        "config": config.to_dict(),
        "versions": _versions(),
        "failures": outcome.failures,
        "status": "failed" if outcome.failures else "ok",
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return outcome


def _write_unit(unit_dir: Path, config: RunConfig, spec: MethodologySpec, label: str, dt: int,
                kind: str, results, unit_nulls, probtiles, failures) -> None:
    write_pvalues(unit_dir / "pvalues.csv", results)
    scores = []
    for censor in sorted({r.censored for r in results}):
        scores.append(aggregate([r for r in results if r.censored == censor]))
    write_scores(unit_dir / "scores.csv", scores)
    labelled = sorted(unit_nulls.items())
    write_null_bands(unit_dir / "nullbands.csv", labelled)
    if labelled:
        for j, spec_t in enumerate(labelled[0][1].ladder.specs):
            write_folded_cdf(unit_dir / f"foldedcdf_{spec_t.t_divisions}.csv",
                             [(k, n.samples[j]) for k, n in labelled if j < len(n.ladder)])
    if config.write_probtiles:
        for inst_id, pt in sorted(probtiles.items()):
            pt.to_csv(unit_dir / f"probtiles_{inst_id}.csv")
    unit_manifest = {
        "config": config.to_dict(),
        "methodology": spec.to_dict(),
        "label": label,
        "dt": dt,
        "benchmark": kind,
        "nulls": {k: n.meta for k, n in labelled},
        "failures": [f for f in failures if f.get("methodology") == label and f.get("dt") == dt],
        "versions": _versions(),
    }
    (unit_dir / "manifest.json").write_text(json.dumps(unit_manifest, indent=1, sort_keys=True) + "\n")


def _versions() -> dict:
    return {"tiletest": __version__, "numpy": np.__version__, "scipy": scipy.__version__}
