import os

import hypothesis
import numpy as np
import pytest

from interface_lab.lattice import LatticeGeometry
from interface_lab.model import Params

np.seterr(all="warn")

hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.register_profile("ci", max_examples=25, deadline=None)
hypothesis.settings.register_profile("thorough", max_examples=200, deadline=None)
hypothesis.settings.register_profile("debugger", report_multiple_bugs=False)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: acceptance criteria (slow)")
    config.addinivalue_line("markers", "slow: long-running Monte Carlo checks")


@pytest.fixture(scope="session")
def g21():
    return LatticeGeometry(2, 1)


@pytest.fixture(scope="session")
def g42():
    return LatticeGeometry(4, 2)


@pytest.fixture(scope="session")
def params_q2():
    return Params(1.0, 2.0)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict():
    """Record one acceptance line; returns the ``ok`` flag for the assert."""

    def record(number: int, ok: bool, detail: str, soft: bool = False) -> bool:
        tag = "PASS" if ok else ("WARN" if soft else "FAIL")
        line = f"criterion {number:2d}: {tag}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
