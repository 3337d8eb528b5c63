import os

import numpy as np
import pytest

from rdk.core import DepthMap, RgbImage

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


def random_image(rng, h=16, w=20):
    return RgbImage(rng.random((h, w, 3)))


def random_depth(rng, h=8, w=8, lo=0.5, hi=50.0):
    return DepthMap(rng.uniform(lo, hi, (h, w)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def fixtures_dir():
    return FIXTURES


# criterion number -> (status, title, detail), filled in by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        status, title, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {status} {title} ({detail})")
