from importlib import resources

import pytest

from entroreact import Grid, SimulationConfig, load_network, run

SO2_INITIAL = ("cosine(1, 0.5, 1)", "constant(1)", "cosine(1, -0.5, 1)")


@pytest.fixture(scope="session")
def so2_path():
    with resources.as_file(resources.files("entroreact") / "data" / "so2.crn") as p:
        yield p


@pytest.fixture(scope="session")
def so2(so2_path):
    return load_network(so2_path)


def so2_config(net, t_end=10.0, n=200, **kw):
    kw.setdefault("totals", (2.0, 7.0))
    return SimulationConfig(net, Grid.interval(1.0, n), SO2_INITIAL, t_end, **kw)


@pytest.fixture(scope="session")
def so2_run(so2):
    """Reference run: 1D, n=200, t_end=10, snapshots kept at cadence."""
    return run(so2_config(so2))


# one summary line per acceptance criterion, printed after the test session
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
