import numpy as np
import pytest

from coopreg.scenarios import TEAM_PERTURBATION, double_integrator_team
from coopreg.synthesis import synthesize_output_feedback, synthesize_state_feedback


@pytest.fixture(scope="session")
def team():
    """Four perturbed double integrators following a ramp leader."""
    return double_integrator_team(TEAM_PERTURBATION)


@pytest.fixture(scope="session")
def team_nominal():
    return double_integrator_team(None)


@pytest.fixture(scope="session")
def sf_ctrl(team):
    return synthesize_state_feedback(team, gamma0=0.1, nu1=1.0)


@pytest.fixture(scope="session")
def of_ctrl(team):
    return synthesize_output_feedback(team, gamma0=0.1, nu1=1.0, nu2=1 / 3)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(test_acceptance.RESULTS[number])
