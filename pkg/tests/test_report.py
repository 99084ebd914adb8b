import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tiletest.benchmark import NullDistribution
from tiletest.report import (LadderMismatchError, SeriesResult, aggregate, folded_cdf,
                             null_bands, read_table, write_folded_cdf, write_null_bands,
                             write_pvalues, write_scores)
from tiletest.tiling import build_ladder

T_DIVS = (1, 2, 3)
LENGTHS = (3.0, 1.5, 1.0)


def result(p, inst="a", censored=False, t_divs=T_DIVS):
    k = len(t_divs)
    return SeriesResult(inst, "m", 1, tuple(t_divs), censored, LENGTHS[:k],
                        tuple(0.1 * (i + 1) for i in range(k)), tuple(p), 1000, "bench1")


def test_single_series_score():
    sc = aggregate([result((0.2, 0.4, 0.9))])
    assert sc.mean_p == (0.2, 0.4, 0.9)
    assert sc.n_series == 1


def test_two_series_mean():
    sc = aggregate([result((0.0, 0.3, 1.0)), result((1.0, 0.3, 1.0), "b")])
    assert sc.mean_p[0] == 0.5


def test_ten_series_against_fsum():
    rng = np.random.default_rng(0)
    ps = rng.random((10, 3))
    sc = aggregate([result(p, str(i)) for i, p in enumerate(ps)])
    for j in range(3):
        assert abs(sc.mean_p[j] - math.fsum(ps[:, j]) / 10) <= 1e-15


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(*[st.floats(0, 1)] * 3), min_size=1, max_size=12), st.randoms())
def test_aggregate_permutation_invariant(ps, rnd):
    results = [result(p, str(i)) for i, p in enumerate(ps)]
    shuffled = results[:]
    rnd.shuffle(shuffled)
    assert aggregate(results).mean_p == aggregate(shuffled).mean_p


def test_aggregate_mixed_ladders():
    with pytest.raises(LadderMismatchError):
        aggregate([result((0.1, 0.2, 0.3)), result((0.1, 0.2), t_divs=(1, 2))])
    with pytest.raises(LadderMismatchError):
        aggregate([result((0.1, 0.2, 0.3)), result((0.1, 0.2, 0.3), censored=True)])


def test_series_result_validation():
    with pytest.raises(ValueError):
        result((0.1, 1.2, 0.3))


def test_folded_cdf_four_points():
    assert folded_cdf([1, 2, 3, 4]) == [(1.0, 0.25), (2.0, 0.5), (3.0, 0.5), (4.0, 0.25)]


def test_folded_cdf_constant():
    assert folded_cdf([2.5] * 7) == [(2.5, 0.5)]


def test_folded_cdf_symmetric_sample():
    x = np.array([-3.0, -1.0, -0.5, 0.0, 0.5, 1.0, 3.0])
    out = folded_cdf(x + 10)
    vals = [f for _, f in out]
    assert vals == vals[::-1]
    assert out[3][0] == 10.0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=2, max_size=60))
def test_folded_cdf_range(xs):
    out = folded_cdf(xs)
    assert all(0 < f <= 0.5 for _, f in out)
    assert [v for v, _ in out] == sorted(set(float(v) for v in xs))


def test_bands_constant_samples():
    ladder = build_ladder(64, 2.0)
    null = NullDistribution(ladder, np.full((len(ladder), 20), 1.5))
    for row, length in zip(null_bands(null), ladder.tile_lengths_years):
        assert (row.mean, row.lower, row.upper) == (1.5, 1.5, 1.5)
        assert row.scaled_mean == pytest.approx(1.5 / math.sqrt(length))


def test_bands_match_samples(bench1_null):
    rows = null_bands(bench1_null)
    for row, s in zip(rows, bench1_null.samples):
        assert row.mean == pytest.approx(math.fsum(s) / len(s), abs=1e-12)
        assert row.upper - row.mean == pytest.approx(np.std(s, ddof=1), abs=1e-12)


def test_bench1_scaled_mean_flat_for_short_tiles(bench1_null):
    rows = [r for r in null_bands(bench1_null) if r.tile_length_years <= 1.0]
    scaled = np.array([r.scaled_mean for r in rows])
    assert len(rows) >= 8
    assert scaled.max() / scaled.min() < 1.15


def test_pvalues_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    results = [SeriesResult(f"s{i}", "m", 10, T_DIVS, True, tuple(rng.random(3) * 5),
                            tuple(rng.random(3) * 9), tuple(rng.random(3)), 123, "bench3")
               for i in range(3)]
    write_pvalues(tmp_path / "p.csv", results)
    rows = read_table(tmp_path / "p.csv")
    assert len(rows) == 9
    for k, row in enumerate(rows):
        r, j = results[k // 3], k % 3
        assert row["instrument"] == r.instrument_id and row["benchmark"] == "bench3"
        assert int(row["t_divisions"]) == r.t_divisions[j]
        assert float(row["p"]) == r.p[j]
        assert float(row["sigma_dn"]) == r.sigma_dn[j]
        assert float(row["tile_length_years"]) == r.tile_lengths_years[j]
    sc = aggregate(results)
    write_scores(tmp_path / "s.csv", [sc])
    back = [float(row["mean_p"]) for row in read_table(tmp_path / "s.csv")]
    assert tuple(back) == sc.mean_p


def test_bands_and_folded_roundtrip(tmp_path, bench1_null):
    write_null_bands(tmp_path / "b.csv", [("bench1", bench1_null)])
    rows = read_table(tmp_path / "b.csv")
    assert [float(r["mean"]) for r in rows] == [b.mean for b in null_bands(bench1_null)]
    write_folded_cdf(tmp_path / "f.csv", [("bench1", bench1_null.samples[3])])
    rows = read_table(tmp_path / "f.csv")
    assert [(float(r["sigma_dn"]), float(r["folded_cdf"])) for r in rows] == \
        folded_cdf(bench1_null.samples[3])
