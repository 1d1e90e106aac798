import functools

import pytest

from rdrop.coefficients import riesz_coefficients
from rdrop.params import ModelParams

_CRITERIA: dict = {}


@functools.lru_cache(maxsize=None)
def cached_coeffs(N: int, alpha: float, d_max: int = 256, self_energy: bool = True):
    return riesz_coefficients(ModelParams(N, alpha), d_max=d_max, self_energy=self_energy)


@pytest.fixture(scope="session")
def coeffs_for():
    return cached_coeffs


@pytest.fixture(scope="session")
def p311():
    return ModelParams(3, 1.0, 1.0)


@pytest.fixture(scope="session")
def c311():
    return cached_coeffs(3, 1.0)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n, title = marker.args
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        entry = _CRITERIA.setdefault(n, {"title": title, "passed": True})
        entry["passed"] = entry["passed"] and report.outcome == "passed"


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        entry = _CRITERIA[n]
        status = "PASS" if entry["passed"] else "FAIL"
        terminalreporter.write_line(f"criterion {n:2d} {status}: {entry['title']}")
