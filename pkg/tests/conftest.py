import numpy as np
import pytest

from tiletest.benchmark import null_distribution
from tiletest.market_data import PriceSeries
from tiletest.tiling import build_ladder

N_LONG = 5052
YEARS_LONG = N_LONG / 252.0


@pytest.fixture(scope="session")
def long_ladder():
    return build_ladder(N_LONG, YEARS_LONG)


@pytest.fixture(scope="session")
def null_cache(tmp_path_factory):
    return tmp_path_factory.mktemp("null_cache")


@pytest.fixture(scope="session")
def bench1_null(long_ladder, null_cache):
    return null_distribution("bench1", 1, N_LONG, long_ladder, n_mc=500, master_seed=1,
                             cache_dir=null_cache)


@pytest.fixture(scope="session")
def bench2_null(long_ladder, null_cache):
    return null_distribution("bench2", 1, N_LONG, long_ladder, n_mc=500, master_seed=3,
                             cache_dir=null_cache)


def make_prices(values, start="2020-01-01", instrument_id="x"):
    dates = np.datetime64(start, "D") + np.arange(len(values))
    return PriceSeries(instrument_id, dates, np.asarray(values, dtype=float))


ACCEPTANCE_LINES: list[str] = []


def acceptance_line(number: int, ok: bool, detail: str) -> str:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
