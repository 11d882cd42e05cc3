import math

import pytest

from dephasim.params import BathSpectrum, SqueezeParams

REPORT = []

TAUS = (0.01, 0.1, 1.0, 5.0, 10.0, 50.0)
RS = (0.0, 0.5, 1.0)
THETAS = (0.0, 0.5 * math.pi, math.pi, 1.5 * math.pi)
LAM = 0.1


def record(label, ok, detail):
    line = f"{label}: {'PASS' if ok else 'FAIL'} ({detail})"
    REPORT.append(line)
    print(line)
    return ok


def grid_points():
    for r in RS:
        for th in THETAS:
            yield SqueezeParams(r, th)


@pytest.fixture
def zero_t():
    return BathSpectrum(LAM, 1.0, 0.0)


def pytest_terminal_summary(terminalreporter):
    if REPORT:
        terminalreporter.section("acceptance criteria")
        for line in REPORT:
            terminalreporter.write_line(line)
