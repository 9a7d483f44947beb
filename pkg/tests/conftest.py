import sys

import numpy as np
import pytest

from builders import family_person


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def family():
    return family_person()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for num in sorted(results):
            terminalreporter.write_line(results[num])
