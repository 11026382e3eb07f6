import numpy as np
import pytest

from importcast.series import MonthStamp, TimeSeries

# criterion lines collected by test_acceptance, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def synthetic_series(n=120, slope=10.0, level=1000.0, amplitude=300.0, noise=0.01, seed=7):
    """Linear trend + period-12 sine, with multiplicative Gaussian noise."""
    t = np.arange(n)
    clean = level + slope * t + amplitude * np.sin(2 * np.pi * t / 12)
    rng = np.random.default_rng(seed)
    return TimeSeries(MonthStamp(2010, 1), clean * (1 + noise * rng.standard_normal(n)))


def records_csv(rows, header="ANIO,MES,PRODUCTO,PESO"):
    return header + "\n" + "\n".join(",".join(str(v) for v in r) for r in rows) + "\n"


@pytest.fixture
def trend_seasonal():
    return synthetic_series()


@pytest.fixture
def series_file(tmp_path):
    def write(series, name="series.csv"):
        path = tmp_path / name
        with open(path, "w", encoding="utf-8", newline="") as fh:
            series.to_csv(fh)
        return str(path)
    return write
