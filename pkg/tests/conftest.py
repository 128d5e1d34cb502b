import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from skyrmion_lab.energy import default_grid, rasterize  # noqa: E402
from skyrmion_lab.numerics import Grid2D  # noqa: E402
from skyrmion_lab.profile import solve_profile  # noqa: E402


@pytest.fixture(scope="session")
def profile50():
    return solve_profile(50.0)


@pytest.fixture(scope="session")
def profile20():
    return solve_profile(20.0)


@pytest.fixture(scope="session")
def profile2():
    return solve_profile(2.0)


@pytest.fixture(scope="session")
def raster50(profile50):
    return rasterize(profile50, default_grid(profile50, 512))


@pytest.fixture(scope="session")
def raster50_coarse(profile50):
    return rasterize(profile50, default_grid(profile50, 256))


@pytest.fixture(scope="session")
def dyn_raster(profile2):
    return rasterize(profile2, Grid2D.uniform(10.0, 128))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
