import numpy as np
import pytest

from lattice_llr import _accel

BACKENDS = ["numpy"] + (["numba"] if _accel.HAS_NUMBA else [])


@pytest.fixture(params=BACKENDS)
def backend(request):
    with _accel.use_backend(request.param):
        yield request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import REPORT
    except ImportError:
        return
    if REPORT:
        terminalreporter.section("acceptance criteria")
        for line in REPORT:
            terminalreporter.write_line(line)
