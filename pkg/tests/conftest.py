import pytest

from neumann_radial.continuation import StepControl, trace_branch
from neumann_radial.radial_ode import parse_nonlinearity


@pytest.fixture(scope="session")
def upper_branch_n4():
    """Branch of type 2+ from the second radial eigenvalue, N = 4, R = 4."""
    return trace_branch("p", 4, 4.0, 2, "+", (2.5, 3.99))


@pytest.fixture(scope="session")
def lower_branch_n4():
    return trace_branch("p", 4, 4.0, 2, "-", (3.0, 4.5))


@pytest.fixture(scope="session")
def eps_branches_n3():
    """Decreasing-side diffusion branches for i = 2..7, N = 3, R = 4, f(u) = u**2."""
    f = parse_nonlinearity("quadratic")
    step = StepControl(morse=False, keep_profiles=True)
    return {i: trace_branch("eps", 3, 4.0, i, "-", (0.02, 2.0), nonlin=f, step=step) for i in range(2, 8)}


_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
