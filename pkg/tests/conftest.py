import pytest
from hypothesis import HealthCheck, settings

from dlsched.core import ParametricCurve
from dlsched.instances import tiny_instance

settings.register_profile(
    "default",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

UNIFORM = ParametricCurve(100.0, 100.0, 8)


@pytest.fixture
def one_trip():
    """One site, one demand, roundtrip 2 slots, setup 1, 48 slots."""
    return tiny_instance([[2]], [UNIFORM], p=1, slots=48)


@pytest.fixture
def two_trips():
    return tiny_instance([[2, 2]], [UNIFORM, UNIFORM], p=1, slots=48)


# -- acceptance summary: one line per criterion ---------------------------------

_CRITERIA = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        name = report.nodeid.split("::")[-1]
        detail = dict(report.user_properties).get("detail", "")
        _CRITERIA[name] = (report.outcome, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_CRITERIA, key=lambda n: int(n.split("_")[2])):
        outcome, detail = _CRITERIA[name]
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{verdict} {name}: {detail}")
