import numpy as np
import pytest

from energynorm import kernels
from energynorm.dataset import EnergyRecord, HardwareSpec, MeasurementTable

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    n, title = marker
    if report.when == "call" or report.outcome != "passed":
        prev = _criteria.get(n, (title, "PASS"))
        status = "PASS" if report.outcome == "passed" and prev[1] == "PASS" else "FAIL"
        _criteria[n] = (title, status)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().criterion = marker.args


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        title, status = _criteria[n]
        terminalreporter.write_line(f"AC{n:<2} {status}  {title}")


@pytest.fixture(params=sorted(kernels.implementations()))
def backend(request):
    """Each available SVR kernel module (compiled and pure Python)."""
    return kernels.implementations()[request.param]


@pytest.fixture
def hw():
    return [HardwareSpec("gpu_a", "GPU A", 250.0, 11.0), HardwareSpec("gpu_b", "GPU B", 70.0, 16.0)]


@pytest.fixture
def small_table(hw):
    recs = []
    for i, m in enumerate(["a", "b", "c"]):
        recs.append(EnergyRecord(m, "gpu_a", 0.1 * (i + 1), flops_forward=1000 * (i + 1), params=10 * (i + 2)))
        recs.append(EnergyRecord(m, "gpu_b", 0.25 * (i + 1) + 0.01, flops_forward=1000 * (i + 1), params=10 * (i + 2)))
    return MeasurementTable(hw, recs)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
