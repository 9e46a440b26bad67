import pytest

from brickwall import GpOracleDenoiser, GpOracleParams, build_linear_schedule, ddim_ladder

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def schedule():
    return build_linear_schedule(1000, 1e-4, 2e-2)


@pytest.fixture(scope="session")
def ladder50():
    return ddim_ladder(1000, 50)


@pytest.fixture(scope="session")
def oracle16(schedule):
    return GpOracleDenoiser(GpOracleParams(rho=0.9, window=16, d=4), schedule)


@pytest.fixture(scope="session")
def oracle80(schedule):
    return GpOracleDenoiser(GpOracleParams(rho=0.9, window=80, d=4), schedule)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
