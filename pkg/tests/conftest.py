import os
import re
import time
import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

warnings.filterwarnings("ignore", message=".*TBB.*")

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

from synrecov import paper_defaults  # noqa: E402
from synrecov.ode import IntegrationConfig, integrate, sensitivity_run  # noqa: E402

# One line per acceptance criterion, printed in the terminal summary.
ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def params():
    return paper_defaults()


@pytest.fixture(scope="session")
def ode_run(params):
    return integrate(params, IntegrationConfig())


@pytest.fixture(scope="session")
def sens_run(params):
    return sensitivity_run(params, IntegrationConfig())


@pytest.fixture(scope="session")
def big_ensemble(params):
    """10^4-run ensemble at paper defaults, shared by the Monte Carlo criteria."""
    from synrecov.ssa import run_ensemble

    t0 = time.perf_counter()
    st = run_ensemble(params, 1.0, 10_000, 2024, keep_times=False)
    st.elapsed = time.perf_counter() - t0
    return st


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        def key(line):
            m = re.match(r"criterion (\d+)(\w*)", line)
            return int(m.group(1)), m.group(2)

        for line in sorted(ACCEPTANCE_LINES, key=key):
            terminalreporter.write_line(line)
