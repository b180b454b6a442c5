import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

_RESULTS = []


@pytest.fixture
def criterion():
    """Record one acceptance line; all lines are echoed in the terminal summary."""

    def report(number, passed, detail):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} ({detail})"
        _RESULTS.append((number, line))
        print(line)
        return passed

    return report


def pytest_terminal_summary(terminalreporter):
    if _RESULTS:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_RESULTS):
            terminalreporter.write_line(line)
