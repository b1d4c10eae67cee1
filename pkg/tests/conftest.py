import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=100,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def applepear():
    from spdlab.envs import make_env

    return make_env("applepear")


@pytest.fixture
def scripted_pairs(applepear):
    from spdlab.envs import scripted_policy

    coop = tuple(scripted_policy(applepear, i, "cooperate") for i in (0, 1))
    defect = tuple(scripted_policy(applepear, i, "defect") for i in (0, 1))
    return coop, defect


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the run
CRITERIA: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for k in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[k])
