import os
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture
def configs():
    return CONFIGS


@pytest.fixture
def rng():
    return np.random.default_rng(42)


ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    """``record(n, name, ok, detail)``: log one criterion's verdict for the summary."""
    def record(n, name, ok, detail):
        line = f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {name}: {detail}"
        ACCEPTANCE[n] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
