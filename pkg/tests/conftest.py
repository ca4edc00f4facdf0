import numpy as np
import pytest
from hypothesis import settings

from blax.statespace import random_pair

settings.register_profile("blax", max_examples=40, deadline=None)
settings.load_profile("blax")

ACCEPTANCE_RESULTS = {}


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def pairs():
    gen = np.random.default_rng(7)
    return [random_pair(gen, d_max=3, p_max=2) for _ in range(5)]


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    detail = dict(report.user_properties).get("detail", "")
    ACCEPTANCE_RESULTS[name] = ("PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE_RESULTS):
        status, detail = ACCEPTANCE_RESULTS[name]
        terminalreporter.write_line(f"{status}  {name}: {detail}")
