import functools

import numpy as np
import pytest

from guided_stereo import kernels

ACCEPTANCE = {}


def record(criterion, title):
    """Decorator for acceptance tests: logs one PASS/FAIL line per criterion."""

    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException as exc:
                ACCEPTANCE[criterion] = (title, "FAIL", f"{type(exc).__name__}: {str(exc)[:120]}")
                raise
            ACCEPTANCE[criterion] = (title, "PASS", "")

        return run

    return wrap


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        title, status, detail = ACCEPTANCE[key]
        line = f"[{status}] {key}. {title}"
        if detail:
            line += f" -- {detail}"
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=["numba", "numpy"])
def backend(request):
    """Kernel set for one backend: dict of census / hamming / aggregate / path."""
    if request.param == "numba":
        return {
            "census": kernels.census_numba,
            "hamming": kernels.hamming_volume_numba,
            "aggregate": kernels.aggregate_numba,
            "path": kernels.path_numba,
        }
    return {
        "census": kernels.census_numpy,
        "hamming": kernels.hamming_volume_numpy,
        "aggregate": kernels.aggregate_numpy,
        "path": kernels.path_numpy,
    }
