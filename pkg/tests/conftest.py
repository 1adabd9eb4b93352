import pytest

from feedback_commons import GameInstance, Policy

ALPHA, THETA = 0.4, 1.0


@pytest.fixture
def sustained_policy():
    """dRT0=0.2 member of the reference family; interior equilibria for small M."""
    return Policy(2.0, 0.2, 2.1, 2.0)


@pytest.fixture
def saturated_policy():
    """dRT0=0.8 member; the equilibrium saturates capacity for every M."""
    return Policy(2.0, 0.8, 2.1, 2.0)


@pytest.fixture
def depleting_policy():
    """dRT0=-1.0 member; capacity below theta."""
    return Policy(2.0, -1.0, 2.1, 2.0)


def game(policy, M=1, alpha=ALPHA, theta=THETA):
    return GameInstance(M, policy, alpha, theta)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
