import sys

import numpy as np
import pytest
from hypothesis import settings

from qtamper.randomness import make_rng

settings.register_profile("qtamper", max_examples=40, deadline=None, derandomize=True)
settings.load_profile("qtamper")


@pytest.fixture
def rng():
    return make_rng(1234)


def assert_close(a, b, tol=1e-10):
    assert np.max(np.abs(np.asarray(a) - np.asarray(b))) <= tol


def pytest_terminal_summary(terminalreporter):
    lines = getattr(sys.modules.get("test_acceptance"), "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
