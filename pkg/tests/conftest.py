import math
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from bekk_ergo.model import BekkModel  # noqa: E402


@pytest.fixture
def scalar_model():
    """c = 1, a^2 = 0.2, e^2 = 0.7."""
    return BekkModel(C=[[1.0]], A=[[[math.sqrt(0.2)]]], B=[[[math.sqrt(0.7)]]])


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and getattr(mod, "RESULTS", None):
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
