import pytest
from hypothesis import HealthCheck, settings

from pulsejet.calibrate import CalibrationBase, calibrated_params

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def calibrated():
    """Model with the stored calibrated values, integrated at 1 ms."""
    return calibrated_params(CalibrationBase(dt=1e-3))


_CRITERIA = {}


@pytest.fixture
def report_criterion():
    """Record a criterion's summary line for the end-of-run table."""
    def record(criterion):
        _CRITERIA[criterion.number] = criterion.line()
        print(criterion.line())
        return criterion
    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[n])
