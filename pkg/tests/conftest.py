import os

# Allow thread-count experiments (determinism and speedup checks) even on
# small machines; must be set before numba is first imported.
os.environ.setdefault("NUMBA_NUM_THREADS", "4")

import numpy as np
import pytest

from superpix import RasterImage, to_feature_image


_acceptance_results = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when != "call":
        return
    criterion = getattr(item.module, "CRITERIA", {}).get(item.name)
    if criterion is not None:
        _acceptance_results[criterion] = report.passed


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(_acceptance_results):
        verdict = "PASS" if _acceptance_results[criterion] else "FAIL"
        terminalreporter.write_line(f"ACCEPTANCE {criterion}: {verdict}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_raster(rng, width, height, channels=3):
    data = rng.integers(0, 256, (height, width, channels)).astype(np.uint8)
    return RasterImage(width, height, channels, data)


def random_features(rng, width, height, channels=3):
    return to_feature_image(random_raster(rng, width, height, channels))
