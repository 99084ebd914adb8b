"""Independent reference implementations used as test oracles."""

import math
from fractions import Fraction

import numpy as np


def brute_force_tiles(time, z, t_divisions, z_divisions, censored=()):
    """Recount tiles one at a time and evaluate the statistic from scratch.

    Column ``c`` holds the times with ``c*span <= (t - t0)*T_t < (c+1)*span``;
    the last column also takes the final time. Band ``b`` holds
    ``b <= z*T_z < b+1``, the top band also takes ``z == 1``. All comparisons
    are exact (integers and fractions).
    """
    time = [int(t) for t in time]
    zq = [Fraction(float(v)) * z_divisions for v in z]
    t0, span = time[0], time[-1] - time[0]
    scaled = (np.array(time, dtype=np.int64) - t0) * t_divisions
    counts = np.zeros((t_divisions, z_divisions), dtype=np.int64)
    for c in range(t_divisions):
        if span == 0:
            in_col = np.full(len(time), c == 0)
        else:
            in_col = (c * span <= scaled) & (scaled < (c + 1) * span)
            if c == t_divisions - 1:
                in_col |= scaled == t_divisions * span
        idx = np.flatnonzero(in_col)
        for b in range(z_divisions):
            n = 0
            for k in idx:
                if b <= zq[k] < b + 1 or (b == z_divisions - 1 and zq[k] == z_divisions):
                    n += 1
            counts[c, b] = n
    kept = [b for b in range(z_divisions) if b not in censored]
    total = 0.0
    for c in range(t_divisions):
        mu = sum(counts[c, b] for b in kept) / len(kept)
        for b in kept:
            total += (counts[c, b] - mu) ** 2
    return counts, math.sqrt(total / (t_divisions * len(kept)))


def random_fixture(rng, n_max=10_000):
    """Random probtile fixture: gapped integer days and z with boundary values mixed in."""
    n = int(rng.integers(16, n_max + 1))
    gaps = rng.choice([1, 1, 1, 2, 3, 5], size=n)
    time = np.cumsum(gaps) + int(rng.integers(0, 10_000))
    z = rng.random(n)
    hit = rng.random(n) < 0.05
    z[hit] = rng.integers(0, 9, hit.sum()) / 8.0
    return time.astype(np.int64), z


def overlap_acf(lag, dt):
    """Autocorrelation of overlapping sums of ``dt`` iid draws."""
    return max(0.0, (dt - abs(lag)) / dt)


def bartlett_se(lag, dt, n):
    """Large-sample standard error of the lag-``lag`` sample autocorrelation."""
    rho = lambda k: overlap_acf(k, dt)  # noqa: E731
    r = rho(lag)
    total = 0.0
    for k in range(-2 * dt - lag, 2 * dt + lag + 1):
        total += (rho(k) ** 2 + rho(k + lag) * rho(k - lag)
                  - 4 * r * rho(k) * rho(k + lag) + 2 * rho(k) ** 2 * r ** 2)
    return math.sqrt(total / n)


def variance_se(dt, n):
    """Standard error of the sample variance of a unit-variance Gaussian overlap process."""
    return math.sqrt(2 * sum(overlap_acf(k, dt) ** 2 for k in range(-dt, dt + 1)) / n)


def sample_acf(x, lag):
    x = np.asarray(x) - np.mean(x)
    return float(np.dot(x[:-lag], x[lag:]) / np.dot(x, x))
