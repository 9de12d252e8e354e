import numpy as np
import pytest

from taustat import CaseSet, DistanceBandSet, RelatednessRule


@pytest.fixture
def four_cases():
    # A(0,0,0), B(0,10,5), C(0,30,10), D(0,40,11)
    return CaseSet(["A", "B", "C", "D"], [0, 0, 0, 0], [0, 10, 30, 40], [0, 5, 10, 11])


@pytest.fixture
def sym2():
    return RelatednessRule(0, 2, directional=False)


@pytest.fixture
def two_bands():
    return DistanceBandSet([(0, 15), (15, 35)])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(RESULTS):
        ok, detail = RESULTS[k]
        terminalreporter.write_line(f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
