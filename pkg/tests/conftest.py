import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from revham import ScheduleParams, evolve_pure, exact_pulses, paper_fitted_pulses

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# acceptance lines collected during the run, printed in the terminal summary
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def p():
    return ScheduleParams(mu=np.pi / 4, A=1.0, T=1.0)


@pytest.fixture(scope="session")
def exact_run(p):
    return evolve_pure(exact_pulses(p))


@pytest.fixture(scope="session")
def fitted_run():
    return evolve_pure(paper_fitted_pulses())
