import numpy as np
import pytest

from f2f.camera import CameraIntrinsics, StereoRig
from f2f.synth import BodyShape, default_rig


@pytest.fixture(scope="session")
def intrinsics():
    return CameraIntrinsics(500.0, 500.0, 320.0, 240.0, 640, 480)


@pytest.fixture(scope="session")
def rig(intrinsics):
    return StereoRig(intrinsics, 0.1)


@pytest.fixture(scope="session")
def synth_rig():
    return default_rig()


@pytest.fixture(scope="session")
def shape():
    return BodyShape()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion."""
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
