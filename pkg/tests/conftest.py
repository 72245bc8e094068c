import re

import numpy as np
import pytest

from vsr_snca import kernels

BACKENDS = ["python"] + (["cython"] if kernels.compiled is not None else [])

_acceptance = {}


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_runtest_logreport(report):
    match = re.search(r"test_criterion_(\d+)", report.nodeid)
    if not match or report.when not in ("setup", "call"):
        return
    n = int(match.group(1))
    if report.when == "setup" and not report.failed:
        return
    _acceptance[n] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_acceptance):
        terminalreporter.write_line(f"criterion {n:2d}: {_acceptance[n]}")
