import numpy as np
import pytest

from perphedge import fixture_path


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def write_prices(tmp_path):
    """Write ``(timestamp, price)`` rows to a close-schema CSV and return its path."""

    def _write(rows, name="prices.csv", header="timestamp,price"):
        path = tmp_path / name
        lines = [header] + [",".join(str(v) for v in row) for row in rows]
        path.write_text("\n".join(lines) + "\n")
        return path

    return _write


@pytest.fixture
def crash_csv():
    return fixture_path("crash.csv")


# one PASS/FAIL line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
