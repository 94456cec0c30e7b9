import functools

import pytest
from hypothesis import HealthCheck, settings

from spd import PRESETS, Partition, SpdProblem, solve_spd

settings.register_profile(
    "default", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@functools.lru_cache(maxsize=None)
def preset_report(name, n=400):
    case = PRESETS[name]
    return solve_spd(SpdProblem(Partition(case.interval, n), case.moment_spec))


@pytest.fixture(scope="session")
def solved():
    return preset_report


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[key])
