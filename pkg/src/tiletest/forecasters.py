"""Ex-ante distribution forecasts for the horizon return.

Every methodology works on the daily log-return grid. A forecast issued at
daily position ``i`` may use ``r[0..i]`` and targets the return over the
next ``horizon`` rows, i.e. the aggregated return dated ``i + horizon``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Literal

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import signal, stats

from .market_data import ReturnSeries, aggregate_returns, moving_sum
from .pit import empirical_cdf, empirical_cdf_1d

Family = Literal[
    "hist_returns_1d", "hist_returns_dt", "riskmetrics94", "lmarch_normal",
    "lmarch_student", "lmarch_empirical_1d", "lmarch_empirical_dt",
]
FAMILIES: tuple[str, ...] = Family.__args__  # type: ignore[attr-defined]
Kind = Literal["parametric_normal", "parametric_student", "empirical"]

VOL_FLOOR = 1e-8


class WarmupError(ValueError):
    """Not enough history to issue a forecast at the requested date."""


class DegenerateVolatilityError(ValueError):
    pass


@dataclass(frozen=True)
class LMArchParams:
    tau1: float = 4.0
    rho: float = math.sqrt(2.0)
    n_components: int = 15
    tau0: float = 1560.0
    init_window: int = 50

    def __post_init__(self):
        if self.tau1 <= 0 or self.rho <= 1 or self.n_components < 1:
            raise ValueError("need tau1 > 0, rho > 1, n_components >= 1")
        if self.tau_max >= self.tau0:
            raise ValueError("longest component must stay below tau0")

    @property
    def taus(self) -> np.ndarray:
        return self.tau1 * self.rho ** np.arange(self.n_components)

    @property
    def tau_max(self) -> float:
        return float(self.tau1 * self.rho ** (self.n_components - 1))

    @property
    def weights(self) -> np.ndarray:
        w = 1.0 - np.log(self.taus) / math.log(self.tau0)
        return w / w.sum()

    @property
    def decays(self) -> np.ndarray:
        return np.exp(-1.0 / self.taus)


@dataclass(frozen=True)
class MethodologySpec:
    family: str
    n_hist: int = 500
    student_dof: float = 6
    ewma_lambda: float = 0.94
    lmarch: LMArchParams = field(default_factory=LMArchParams)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown methodology family {self.family!r}")
        if self.n_hist < 2:
            raise ValueError("n_hist must be >= 2")
        if not self.student_dof > 2:
            raise ValueError("student_dof must exceed 2 (finite variance)")
        if not 0 <= self.ewma_lambda < 1:
            raise ValueError("ewma_lambda must lie in [0, 1)")

    @property
    def uses_vol(self) -> bool:
        return not self.family.startswith("hist_returns")

    @property
    def kind(self) -> str:
        if self.family in ("riskmetrics94", "lmarch_normal"):
            return "parametric_normal"
        if self.family == "lmarch_student":
            return "parametric_student"
        return "empirical"

    @property
    def vol_warmup(self) -> int:
        """First daily position at which the volatility forecast is valid."""
        return int(self.lmarch.tau_max // 2)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "MethodologySpec":
        d = dict(d)
        if isinstance(d.get("lmarch"), dict):
            d["lmarch"] = LMArchParams(**d["lmarch"])
        return cls(**d)


# ---------------------------------------------------------------------------
# single forecasts

@dataclass(frozen=True)
class DistributionForecast:
    """Forecast distribution of one horizon return (zero location)."""

    kind: str
    scale: float = 1.0
    dof: float | None = None
    scenarios: np.ndarray | None = None

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "parametric_normal":
            return stats.norm.cdf(x / self.scale)
        if self.kind == "parametric_student":
            return stats.t.cdf(x / (self.scale * _student_unit(self.dof)), self.dof)
        if self.kind == "empirical":
            return empirical_cdf_1d(self.scenarios, x)
        raise ValueError(f"unknown forecast kind {self.kind!r}")


def _student_unit(dof: float) -> float:
    # raw Student(dof) scale giving unit variance
    return math.sqrt((dof - 2.0) / dof)


@dataclass(frozen=True)
class VolForecast:
    date: np.datetime64
    sigma: float


@dataclass(frozen=True)
class VolSeries:
    """Daily volatility forecasts aligned on the daily return grid.

    ``sigma[i]`` uses returns up to and including position ``i``; entries
    before ``first_valid`` are warm-up values and must not be used.
    """

    dates: np.ndarray
    sigma: np.ndarray
    first_valid: int = 0

    def __len__(self) -> int:
        return len(self.sigma)

    def __getitem__(self, i: int) -> VolForecast:
        return VolForecast(self.dates[i], float(self.sigma[i]))

    def at_horizon(self, horizon_days: int,
                   scaling: Callable[[np.ndarray, int], np.ndarray] | None = None) -> np.ndarray:
        scaling = scaling or sqrt_time_scaling
        return scaling(self.sigma, horizon_days)

    def position(self, date) -> int:
        d = np.datetime64(date, "D")
        i = int(np.searchsorted(self.dates, d))
        if i >= len(self.dates) or self.dates[i] != d:
            raise KeyError(f"{d} not on the volatility grid")
        return i


def sqrt_time_scaling(sigma_1d: np.ndarray, horizon_days: int) -> np.ndarray:
    return sigma_1d * math.sqrt(horizon_days)


def _ema(x2: np.ndarray, decay: float, init: float) -> np.ndarray:
    # y[t] = decay * y[t-1] + (1 - decay) * x2[t], y[-1] = init
    y, _ = signal.lfilter([1.0 - decay], [1.0, -decay], x2, zi=[decay * init])
    return y


def _init_variance(r: np.ndarray, window: int) -> float:
    return float(np.mean(r[:window] ** 2))


def ewma_vol(returns_1d: ReturnSeries, lam: float = 0.94, init_window: int = 50,
             first_valid: int = 0) -> VolSeries:
    """RiskMetrics exponential moving average of squared daily returns."""
    r = returns_1d.values
    if len(r) == 0:
        raise WarmupError("empty return series")
    var = _ema(r ** 2, lam, _init_variance(r, init_window))
    return VolSeries(returns_1d.dates, np.maximum(np.sqrt(var), VOL_FLOOR), first_valid)


def lmarch_component_variances(r: np.ndarray, params: LMArchParams) -> np.ndarray:
    """(K, n) array of the EMA variances at each characteristic time."""
    init = _init_variance(r, params.init_window)
    return np.vstack([_ema(r ** 2, mu, init) for mu in params.decays])


def lmarch_vol(returns_1d: ReturnSeries, params: LMArchParams | None = None) -> VolSeries:
    """Long-memory ARCH volatility: convex mix of EMAs of squared returns."""
    params = params or LMArchParams()
    r = returns_1d.values
    warm = int(params.tau_max // 2)
    if len(r) <= warm:
        raise WarmupError(f"need more than {warm} returns for LM-ARCH warm-up")
    var = params.weights @ lmarch_component_variances(r, params)
    return VolSeries(returns_1d.dates, np.maximum(np.sqrt(var), VOL_FLOOR), warm)


def volatility(spec: MethodologySpec, returns_1d: ReturnSeries) -> VolSeries:
    if spec.family == "riskmetrics94":
        vol = ewma_vol(returns_1d, spec.ewma_lambda, spec.lmarch.init_window)
        return replace(vol, first_valid=spec.vol_warmup)
    return lmarch_vol(returns_1d, spec.lmarch)


@dataclass(frozen=True)
class InnovationSeries:
    dates: np.ndarray
    eps: np.ndarray


def innovations(returns_dt: ReturnSeries, vol: VolSeries, horizon_days: int) -> InnovationSeries:
    """Standardize each horizon return by the volatility issued ``horizon`` rows before it."""
    dt = int(horizon_days)
    pos = np.searchsorted(vol.dates, returns_dt.dates)
    if np.any(pos >= len(vol.dates)) or np.any(vol.dates[np.minimum(pos, len(vol) - 1)] != returns_dt.dates):
        raise ValueError("return dates are not on the volatility grid")
    src = pos - dt
    ok = src >= vol.first_valid
    sig = vol.at_horizon(dt)[src[ok]]
    if np.any(sig <= 0):
        raise DegenerateVolatilityError("zero volatility forecast")
    return InnovationSeries(returns_dt.dates[ok], returns_dt.values[ok] / sig)


def hist_returns_forecast(returns_1d: ReturnSeries, t, horizon_days: int,
                          variant: str = "at_1d", n_hist: int = 500) -> DistributionForecast:
    """Historical-return scenarios for the forecast issued at date ``t``."""
    i = _daily_position(returns_1d, t)
    dt = int(horizon_days)
    r = returns_1d.values
    if variant == "at_1d":
        if i - n_hist + 1 < 0:
            raise WarmupError(f"need {n_hist} returns up to {t}")
        scen = r[i - n_hist + 1:i + 1] * math.sqrt(dt)
    elif variant == "at_dt":
        lo = i - n_hist + 1 - (dt - 1)
        if lo < 0:
            raise WarmupError(f"need {n_hist} {dt}-day returns up to {t}")
        scen = moving_sum(r[lo:i + 1], dt)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return DistributionForecast("empirical", scenarios=scen)


def make_forecast(spec: MethodologySpec, returns_1d: ReturnSeries, vol: VolSeries | None,
                  t, horizon_days: int) -> DistributionForecast:
    """Forecast issued at date ``t`` for any methodology (one date at a time)."""
    dt = int(horizon_days)
    if spec.family == "hist_returns_1d":
        return hist_returns_forecast(returns_1d, t, dt, "at_1d", spec.n_hist)
    if spec.family == "hist_returns_dt":
        return hist_returns_forecast(returns_1d, t, dt, "at_dt", spec.n_hist)
    if vol is None:
        raise ValueError(f"{spec.family} needs a volatility series")
    i = _daily_position(returns_1d, t)
    if i < first_forecast_position(spec, dt):
        raise WarmupError(f"{spec.family}: {t} is inside the warm-up period")
    if spec.kind == "parametric_normal":
        return DistributionForecast("parametric_normal", scale=float(vol.at_horizon(dt)[i]))
    if spec.kind == "parametric_student":
        return DistributionForecast("parametric_student", scale=float(vol.at_horizon(dt)[i]),
                                    dof=spec.student_dof)
    eps, mult = _innovation_grid(spec, returns_1d, vol, dt)
    scen = eps[i - spec.n_hist + 1:i + 1] * mult[i]
    return DistributionForecast("empirical", scenarios=scen)


def _daily_position(returns_1d: ReturnSeries, t) -> int:
    d = np.datetime64(t, "D")
    i = int(np.searchsorted(returns_1d.dates, d))
    if i >= len(returns_1d) or returns_1d.dates[i] != d:
        raise KeyError(f"{d} is not a date of the return series")
    return i


def _innovation_grid(spec: MethodologySpec, returns_1d: ReturnSeries, vol: VolSeries,
                     dt: int) -> tuple[np.ndarray, np.ndarray]:
    """Innovations on the daily grid (NaN where undefined) and scenario multipliers."""
    n = len(returns_1d)
    eps = np.full(n, np.nan)
    if spec.family == "lmarch_empirical_1d":
        inn = innovations(returns_1d, vol, 1)
        mult = vol.at_horizon(dt)
    else:
        inn = innovations(aggregate_returns(returns_1d, dt), vol, dt)
        mult = vol.at_horizon(dt)
    eps[np.searchsorted(returns_1d.dates, inn.dates)] = inn.eps
    return eps, mult


def first_forecast_position(spec: MethodologySpec, horizon_days: int) -> int:
    dt = int(horizon_days)
    if spec.family == "hist_returns_1d":
        return spec.n_hist - 1
    if spec.family == "hist_returns_dt":
        return spec.n_hist + dt - 2
    if spec.kind == "empirical":
        lag = 1 if spec.family == "lmarch_empirical_1d" else dt
        return spec.vol_warmup + lag + spec.n_hist - 1
    return max(spec.n_hist, spec.vol_warmup)


# ---------------------------------------------------------------------------
# batch forecasts

@dataclass(frozen=True)
class ForecastSeries:
    """All forecasts of one methodology on one series, in vectorized form.

    Parametric kinds carry one ``scale`` per date. The empirical kind carries
    a shared ``base`` array: the scenarios of row ``j`` are
    ``base[starts[j]:starts[j] + window] * scale[j]``.
    """

    kind: str
    horizon_days: int
    dates: np.ndarray
    target_dates: np.ndarray
    scale: np.ndarray
    dof: float | None = None
    base: np.ndarray | None = None
    starts: np.ndarray | None = None
    window: int = 0

    def __len__(self) -> int:
        return len(self.dates)

    def subset(self, idx) -> "ForecastSeries":
        idx = np.asarray(idx)
        return replace(self, dates=self.dates[idx], target_dates=self.target_dates[idx],
                       scale=self.scale[idx],
                       starts=None if self.starts is None else self.starts[idx])

    def __getitem__(self, j: int) -> DistributionForecast:
        if self.kind == "empirical":
            s = self.starts[j]
            return DistributionForecast("empirical",
                                        scenarios=self.base[s:s + self.window] * self.scale[j])
        return DistributionForecast(self.kind, scale=float(self.scale[j]), dof=self.dof)

    def cdf(self, x) -> np.ndarray:
        """Evaluate forecast ``j`` at ``x[j]`` for every ``j``."""
        x = np.asarray(x, dtype=float)
        if self.kind == "parametric_normal":
            return stats.norm.cdf(x / self.scale)
        if self.kind == "parametric_student":
            return stats.t.cdf(x / (self.scale * _student_unit(self.dof)), self.dof)
        windows = sliding_window_view(self.base, self.window)[self.starts]
        return empirical_cdf(windows, x / self.scale)


def build_forecasts(spec: MethodologySpec, returns_1d: ReturnSeries,
                    horizon_days: int) -> ForecastSeries:
    """Every forecast the methodology can issue on ``returns_1d``.

    Forecasts are emitted from the end of the warm-up up to the last daily
    date; those whose target lies beyond the data carry a ``NaT`` target.
    """
    if returns_1d.horizon_days != 1 or returns_1d.scaling != "raw":
        raise ValueError("forecasters need raw daily returns")
    dt = int(horizon_days)
    n = len(returns_1d)
    first = first_forecast_position(spec, dt)
    if first >= n:
        raise WarmupError(f"{spec.family}: series of {n} returns is shorter than the warm-up")
    pos = np.arange(first, n)
    dates = returns_1d.dates[pos]
    targets = np.full(len(pos), np.datetime64("NaT"), dtype="datetime64[D]")
    has_target = pos + dt < n
    targets[has_target] = returns_1d.dates[pos[has_target] + dt]
    r = returns_1d.values
    window = spec.n_hist

    if spec.family == "hist_returns_1d":
        return ForecastSeries("empirical", dt, dates, targets,
                              np.full(len(pos), math.sqrt(dt)), base=r,
                              starts=pos - window + 1, window=window)
    if spec.family == "hist_returns_dt":
        rdt = moving_sum(r, dt)  # rdt[k] ends at daily position k + dt - 1
        return ForecastSeries("empirical", dt, dates, targets, np.ones(len(pos)),
                              base=rdt, starts=pos - window + 1 - (dt - 1), window=window)

    vol = volatility(spec, returns_1d)
    sig = vol.at_horizon(dt)[pos]
    if spec.kind == "parametric_normal":
        return ForecastSeries("parametric_normal", dt, dates, targets, sig)
    if spec.kind == "parametric_student":
        return ForecastSeries("parametric_student", dt, dates, targets, sig, dof=spec.student_dof)
    eps, _ = _innovation_grid(spec, returns_1d, vol, dt)
    starts = pos - window + 1
    if np.isnan(eps[starts.min():]).any():
        raise WarmupError("innovation window reaches into the warm-up")
    return ForecastSeries("empirical", dt, dates, targets, sig, base=eps,
                          starts=starts, window=window)
