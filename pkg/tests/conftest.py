import numpy as np
import pytest


def ks_against(samples, cdf):
    """Sup distance between the empirical CDF of ``samples`` and ``cdf``."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    u = np.unique(x)
    # compare both the value and the left limit at each sample point, so
    # atoms in ``cdf`` are handled correctly
    right = np.abs(np.searchsorted(x, u, "right") / n - np.asarray(cdf(u), dtype=float))
    left_u = np.nextafter(u, -np.inf)
    left = np.abs(np.searchsorted(x, u, "left") / n - np.asarray(cdf(left_u), dtype=float))
    return float(max(right.max(), left.max()))


@pytest.fixture
def normal200():
    return np.random.default_rng(20240611).normal(size=200)


ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line for an acceptance criterion."""

    def _report(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
