import pytest

from emdisc.sde_model import FunctionSpec, PiecewiseDrift, SdeProblem, step_drift


@pytest.fixture(scope="session")
def p1():
    """mu = 1 below 0, -1 at and above 0, sigma = 1, x0 = 0."""
    return step_drift([0.0], [1.0, -1.0])


@pytest.fixture(scope="session")
def two_breaks():
    drift = PiecewiseDrift(
        (0.0, 1.0),
        (FunctionSpec.constant(1.0), FunctionSpec.affine(-1.0, 0.5),
         FunctionSpec.constant(-2.5)),
    )
    return SdeProblem(0.3, drift, FunctionSpec.affine(1.0, 0.25))


@pytest.fixture(scope="session")
def gbm():
    drift = PiecewiseDrift.lipschitz(FunctionSpec.affine(0.0, 0.05))
    return SdeProblem(1.0, drift, FunctionSpec.affine(0.0, 0.2))


_CRITERIA = []


@pytest.fixture(scope="session")
def criterion_log():
    """Collects one line per acceptance criterion for the terminal summary."""
    return _CRITERIA


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(_CRITERIA):
        terminalreporter.write_line(line)
