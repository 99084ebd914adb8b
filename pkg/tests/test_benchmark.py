import math

import numpy as np
import pytest
from scipy import stats

from tiletest.benchmark import (NullDistribution, TilingMismatchError, bench_kind,
                                bench_probtiles, bench_z, load_null, null_distribution, p_value,
                                path_rng, raw_length, simulate_returns)
from tiletest.pit import empirical_cdf_1d
from tiletest.tiling import TilingSpec, build_ladder, ladder_sigmas

from oracles import bartlett_se, overlap_acf, sample_acf, variance_se


def test_kind_normalization():
    assert bench_kind(1) == bench_kind("1") == bench_kind("bench1") == "bench1"
    with pytest.raises(ValueError):
        bench_kind(4)


def test_raw_lengths():
    assert raw_length("bench1", 10, 5052) == 5061
    assert raw_length("bench2", 10, 5052) == 5052 + 500 + 9
    assert raw_length("bench3", 10, 5052) == 5052 + 500 + 18


def test_simulated_daily_returns_uncorrelated():
    n = 100_000
    y = simulate_returns(n, 1, seed=11).values
    assert len(y) == n
    assert abs(sample_acf(y, 1)) < 3 / math.sqrt(n)


def test_simulated_overlap_structure():
    n, dt = 100_000, 10
    y = simulate_returns(n, dt, seed=12).values
    assert abs(sample_acf(y, 5) - overlap_acf(5, dt)) < 3 * bartlett_se(5, dt, n)
    assert abs(np.var(y) - 1) < 3 * variance_se(dt, n)


@pytest.mark.parametrize("kind", ["bench1", "bench2", "bench3"])
@pytest.mark.parametrize("dt", [1, 7])
def test_probtile_length(kind, dt):
    z = bench_z(kind, dt, 777, path_rng(0, 0))
    assert z.shape == (777,)
    assert np.all((z > 0) & (z < 1))


def test_bench1_uniform():
    z = bench_probtiles("bench1", 1, 100_000, seed=5).z
    assert stats.kstest(z, "uniform").pvalue > 0.01


def test_bench2_equals_bench3_at_dt1():
    a = bench_z("bench2", 1, 3000, path_rng(8, 3))
    b = bench_z("bench3", 1, 3000, path_rng(8, 3))
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("dt", [1, 4])
def test_bench2_loop_oracle(dt):
    n, m = 60, 50
    z = bench_z("bench2", dt, n, path_rng(4, 1), n_trailing=m)
    e = path_rng(4, 1).standard_normal(raw_length("bench2", dt, n, m))
    for j in range(n):
        window = e[j:j + m]                      # daily draws known before the horizon
        oos = e[j + m:j + m + dt].sum() / math.sqrt(dt)
        assert z[j] == pytest.approx(empirical_cdf_1d(window, oos)[()], abs=1e-14)


@pytest.mark.parametrize("dt", [1, 4])
def test_bench3_loop_oracle(dt):
    n, m = 60, 50
    z = bench_z("bench3", dt, n, path_rng(4, 2), n_trailing=m)
    e = path_rng(4, 2).standard_normal(raw_length("bench3", dt, n, m))
    ret = lambda k: e[k:k + dt].sum() / math.sqrt(dt)  # noqa: E731  horizon return from day k
    for j in range(n):
        s = j + m + dt - 1                       # first day of the out-of-sample return
        window = [ret(k) for k in range(s - dt - m + 1, s - dt + 1)]
        assert max(k + dt - 1 for k in range(s - dt - m + 1, s - dt + 1)) < s
        assert z[j] == pytest.approx(empirical_cdf_1d(np.array(window), ret(s))[()], abs=1e-14)


@pytest.fixture(scope="module")
def small_ladder():
    return build_ladder(400, 400 / 252)


def test_null_shape_and_moments(small_ladder):
    null = null_distribution("bench1", 1, 400, small_ladder, n_mc=37, master_seed=2)
    assert null.samples.shape == (len(small_ladder), 37)
    assert np.all(np.diff(null.samples, axis=1) >= 0)
    np.testing.assert_allclose(null.mean, [np.mean(r) for r in null.samples], rtol=1e-12)
    np.testing.assert_allclose(null.std, [np.std(r, ddof=1) for r in null.samples], rtol=1e-12)


def test_null_paths_are_indexed(small_ladder):
    null = null_distribution("bench3", 3, 400, small_ladder, n_mc=5, master_seed=9)
    manual = np.sort(np.array([ladder_sigmas(bench_z("bench3", 3, 400, path_rng(9, k)),
                                             small_ladder) for k in range(5)]).T, axis=1)
    np.testing.assert_array_equal(null.samples, manual)


def test_null_independent_of_jobs(small_ladder):
    a = null_distribution("bench2", 2, 400, small_ladder, n_mc=30, master_seed=4, jobs=1)
    b = null_distribution("bench2", 2, 400, small_ladder, n_mc=30, master_seed=4, jobs=2)
    np.testing.assert_array_equal(a.samples, b.samples)


def test_null_cache_roundtrip(tmp_path, small_ladder):
    a = null_distribution("bench1", 5, 400, small_ladder, n_mc=20, master_seed=1,
                          cache_dir=tmp_path)
    files = sorted(p.name for p in tmp_path.iterdir())
    assert len(files) == 2 and files[0].endswith(".json") and files[1].endswith(".npy")
    back = load_null(tmp_path, a.meta, small_ladder)
    np.testing.assert_array_equal(back.samples, a.samples)
    again = null_distribution("bench1", 5, 400, small_ladder, n_mc=20, master_seed=1,
                              cache_dir=tmp_path)
    np.testing.assert_array_equal(again.samples, a.samples)
    other = null_distribution("bench1", 5, 400, small_ladder, n_mc=20, master_seed=2,
                              cache_dir=tmp_path)
    assert not np.array_equal(other.samples, a.samples)
    assert len(list(tmp_path.iterdir())) == 4


def _toy_null(values):
    ladder = build_ladder(16, 1.0)
    return NullDistribution(ladder, np.sort(np.asarray(values, dtype=float))[None, :])


def test_p_value_edges():
    null = _toy_null(np.arange(1, 102))
    assert p_value(null, 0, 0.5) == 1.0
    assert p_value(null, 0, 200.0) == 0.0
    assert abs(p_value(null, 0, float(np.median(null.samples[0]))) - 0.5) <= 1 / null.n_mc
    assert p_value(null, 0, 101.0) == 0.0  # ties do not exceed
    assert p_value(null, TilingSpec(1), 50.5) == pytest.approx(51 / 101)


def test_p_value_tiling_mismatch():
    null = _toy_null([1.0, 2.0])
    with pytest.raises(TilingMismatchError):
        p_value(null, TilingSpec(1, censor_central_z=True), 1.0)
    with pytest.raises(TilingMismatchError):
        p_value(null, 3, 1.0)


def test_mean_reversion_effect(bench1_null, bench2_null, long_ladder):
    for t in (2, 4):
        i = long_ladder.t_divisions.index(t)
        assert np.median(bench2_null.samples[i]) < np.median(bench1_null.samples[i])


@pytest.mark.slow
@pytest.mark.parametrize("kind,dt", [("bench2", 1), ("bench3", 5)])
def test_calibration_adapted_benchmarks(kind, dt):
    # 400 trials rather than 100 so the 0.05 bound is not a coin toss over 11 tilings
    n = 1500
    ladder = build_ladder(n, n / 252)
    null = null_distribution(kind, dt, n, ladder, n_mc=1000, master_seed=101)
    trials = null_distribution(kind, dt, n, ladder, n_mc=400, master_seed=202)
    # trial samples are sorted per tiling, which is fine: p is evaluated tiling by tiling
    p = np.array([[p_value(null, i, s) for s in trials.samples[i]] for i in range(len(ladder))])
    np.testing.assert_array_less(np.abs(p.mean(axis=1) - 0.5), 0.05)


@pytest.mark.slow
def test_calibration_bench1_high_power(long_ladder):
    # same setup as the 100-trial acceptance check, with 10x the trials
    null = null_distribution("bench1", 1, 5052, long_ladder, n_mc=1000, master_seed=31)
    trials = null_distribution("bench1", 1, 5052, long_ladder, n_mc=1000, master_seed=32)
    p = np.array([[p_value(null, i, s) for s in trials.samples[i]]
                  for i in range(len(long_ladder))])
    np.testing.assert_array_less(np.abs(p.mean(axis=1) - 0.5), 0.03)
