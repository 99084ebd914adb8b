"""Synthetic price paths with a known generating law."""

from __future__ import annotations

import math

import numpy as np

from .forecasters import LMArchParams
from .market_data import PriceSeries

SYNTH_KINDS = ("normal_rw", "garch11", "lmarch")

DEFAULTS = {
    "normal_rw": {"sigma": 0.01, "mu": 0.0},
    "garch11": {"omega": 1e-6, "alpha": 0.08, "beta": 0.91},
    "lmarch": {"sigma_inf": 0.01, "w_inf": 0.05},
}


def business_days(n: int, start: str = "2000-01-03") -> np.ndarray:
    return np.busday_offset(np.datetime64(start, "D"), np.arange(n), roll="forward")


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), 0x5F3])))


def garch11_returns(n: int, omega: float, alpha: float, beta: float,
                    rng: np.random.Generator) -> np.ndarray:
    if omega <= 0 or alpha < 0 or beta < 0 or alpha + beta >= 1:
        raise ValueError("garch11 needs omega > 0, alpha, beta >= 0, alpha + beta < 1")
    eps = rng.standard_normal(n)
    r = np.empty(n)
    var = omega / (1.0 - alpha - beta)
    for t in range(n):
        r[t] = math.sqrt(var) * eps[t]
        var = omega + alpha * r[t] ** 2 + beta * var
    return r


def lmarch_returns(n: int, sigma_inf: float, w_inf: float, rng: np.random.Generator,
                   params: LMArchParams | None = None) -> np.ndarray:
    """LM-ARCH process with a small weight on a constant long-run variance.

    Without the constant term the convex mix of EMAs has no mean reversion
    and the variance wanders off.
    """
    if sigma_inf <= 0 or not 0 < w_inf < 1:
        raise ValueError("lmarch needs sigma_inf > 0 and 0 < w_inf < 1")
    params = params or LMArchParams()
    mus, w = params.decays, params.weights
    comp = np.full(len(mus), sigma_inf ** 2)
    eps = rng.standard_normal(n)
    r = np.empty(n)
    for t in range(n):
        var = w_inf * sigma_inf ** 2 + (1.0 - w_inf) * float(w @ comp)
        r[t] = math.sqrt(var) * eps[t]
        comp = mus * comp + (1.0 - mus) * r[t] ** 2
    return r


def synth_generate(kind: str, params: dict | None = None, n_days: int = 5000,
                   seed: int = 0, instrument_id: str | None = None,
                   start_price: float = 100.0) -> PriceSeries:
    """Price path ``start_price * exp(cumsum(r))`` on ``n_days`` business days."""
    if kind not in SYNTH_KINDS:
        raise ValueError(f"unknown synthetic kind {kind!r}; choose from {SYNTH_KINDS}")
    if n_days < 2:
        raise ValueError("n_days must be >= 2")
    p = {**DEFAULTS[kind], **(params or {})}
    unknown = set(p) - set(DEFAULTS[kind])
    if unknown:
        raise ValueError(f"unknown {kind} parameters: {sorted(unknown)}")
    rng = _rng(seed)
    m = n_days - 1
    if kind == "normal_rw":
        if p["sigma"] < 0:
            raise ValueError("sigma must be >= 0")
        r = p["mu"] + p["sigma"] * rng.standard_normal(m)
    elif kind == "garch11":
        r = garch11_returns(m, p["omega"], p["alpha"], p["beta"], rng)
    else:
        r = lmarch_returns(m, p["sigma_inf"], p["w_inf"], rng)
    prices = start_price * np.exp(np.concatenate([[0.0], np.cumsum(r)]))
    return PriceSeries(instrument_id or f"{kind}_{seed}", business_days(n_days), prices)
