"""Command line entry point: ``tiletest run|null|synth``.

Exit codes: 0 success, 1 invalid input or configuration, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .benchmark import null_distribution
from .market_data import DataError, save_csv
from .pipeline import ConfigError, load_config, run
from .report import write_folded_cdf, write_null_bands
from .synthetic import SYNTH_KINDS, synth_generate
from .tiling import build_ladder

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2

log = logging.getLogger("tiletest")


def _parse_params(items: list[str]) -> dict:
    params = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"expected key=value, got {item!r}")
        params[key] = float(value)
    return params


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tiletest", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a back-test described by a YAML or JSON config")
    r.add_argument("config")
    r.add_argument("--seed", type=int, help="override master_seed")
    r.add_argument("--out", help="override the output directory")
    r.add_argument("--jobs", type=int, default=1, help="parallel Monte Carlo workers")
    r.add_argument("--n-mc", type=int, help="override n_mc")
    r.add_argument("--run-id", help="override run_id")

    n = sub.add_parser("null", help="build (and cache) a benchmark null distribution")
    n.add_argument("--kind", required=True, choices=["1", "2", "3"])
    n.add_argument("--dt", type=int, default=1)
    n.add_argument("--n", type=int, required=True, help="probtile sample length N")
    n.add_argument("--years", type=float, help="sample length in years (default N/252)")
    n.add_argument("--n-mc", type=int, default=500)
    n.add_argument("--seed", type=int, default=0)
    n.add_argument("--censor", action="store_true")
    n.add_argument("--censor-bands", type=int, default=2)
    n.add_argument("--cache", default="null_cache")
    n.add_argument("--out", help="directory for nullbands.csv and folded cdf tables")
    n.add_argument("--jobs", type=int, default=1)

    s = sub.add_parser("synth", help="write a synthetic price series as CSV")
    s.add_argument("--kind", required=True, choices=SYNTH_KINDS)
    s.add_argument("--n-days", type=int, default=5000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--param", action="append", metavar="KEY=VALUE", default=[])
    s.add_argument("--id")
    s.add_argument("--out", required=True, help="output CSV path")
    return p


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.master_seed = args.seed
        if args.out is not None:
            cfg.out = args.out
        if args.n_mc is not None:
            if args.n_mc < 1:
                raise ConfigError("--n-mc must be positive")
            cfg.n_mc = args.n_mc
        if args.run_id is not None:
            cfg.run_id = args.run_id
        if args.jobs < 1:
            raise ConfigError("--jobs must be positive")
    except (ConfigError, DataError) as exc:
        log.error("invalid configuration: %s", exc)
        return EXIT_VALIDATION
    try:
        outcome = run(cfg, jobs=args.jobs)
    except Exception as exc:  # noqa: BLE001
        log.error("run failed: %s", exc)
        return EXIT_RUNTIME
    for f in outcome.failures:
        log.error("failure: %s", f)
    log.info("wrote %s", outcome.root)
    return outcome.exit_code


def cmd_null(args) -> int:
    years = args.years if args.years is not None else args.n / 252.0
    try:
        ladder = build_ladder(args.n, years, censor_central_z=args.censor,
                              censor_bands=args.censor_bands)
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION
    null = null_distribution(args.kind, args.dt, args.n, ladder, args.n_mc, args.seed,
                             jobs=args.jobs, cache_dir=args.cache)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        label = f"bench{args.kind}_dt{args.dt}_n{args.n}"
        write_null_bands(out / "nullbands.csv", [(label, null)])
        for j, spec in enumerate(ladder.specs):
            write_folded_cdf(out / f"foldedcdf_{spec.t_divisions}.csv", [(label, null.samples[j])])
    for spec, length, mu, sd in zip(ladder.specs, ladder.tile_lengths_years, null.mean, null.std):
        print(f"T_t={spec.t_divisions:4d}  tile={length:8.3f}y  mean={mu:9.4f}  std={sd:8.4f}")
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        series = synth_generate(args.kind, _parse_params(args.param), args.n_days, args.seed,
                                instrument_id=args.id)
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION
    save_csv(series, args.out)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    return {"run": cmd_run, "null": cmd_null, "synth": cmd_synth}[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
